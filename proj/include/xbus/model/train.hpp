// Copyright 2026 The XBusNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <optional>

#include "xbus/data/folds.hpp"
#include "xbus/data/sample.hpp"
#include "xbus/model/loss.hpp"
#include "xbus/model/network.hpp"
#include "xbus/model/postprocess.hpp"

namespace xbus::model {

/// A sample resized to the model input with its prompts encoded and its
/// frozen ViT token stacks cached.
struct PreparedSample {
    std::string image_id;
    Tensor image;              // [3,S,S]
    Tensor mask;               // [1,S,S]
    Mask binary_mask;
    std::string global_text, local_text;
    Tensor e_c, e_l;           // [1,d]
    std::vector<Tensor> taps;  // each [1,N,D]
};

inline Tensor row_tensor(const prompt::Embedding& e)
{
    return Tensor(Shape{1, e.size()}, e);
}

/// Prompts from the reference mask: size bin from metadata, quadrant from the
/// mask centroid.
inline std::pair<std::string, std::string> reference_prompts(const data::Sample& s, const prompt::SizeBins& bins)
{
    const auto c = prompt::centroid_from_mask(s.mask);
    const auto q = prompt::quadrant_of(c, s.mask.height, s.mask.width);
    return {prompt::verbalize_global(prompt::discretize_size(s.metadata.size_value, bins), q),
            prompt::verbalize_local(s.metadata)};
}

inline PreparedSample prepare_sample(const XBusNet& net, const data::Sample& raw, const prompt::SizeBins& bins)
{
    const auto s = data::resize_sample(raw, net.config().image_size());
    PreparedSample p;
    p.image_id = s.metadata.image_id;
    p.image = s.image;
    p.mask = data::mask_tensor(s.mask);
    p.binary_mask = s.mask;
    std::tie(p.global_text, p.local_text) = reference_prompts(raw, bins);
    p.e_c = row_tensor(net.text_encoder().encode_text(p.global_text));
    p.e_l = row_tensor(net.text_encoder().encode_text(p.local_text));
    const Tensor batch = reshape(s.image, {1, 3, s.height(), s.width()});
    p.taps = net.gfe().taps(batch);
    return p;
}

/// Stacked forward input for a subset of prepared samples.
inline ForwardInput make_batch(const std::vector<PreparedSample>& set, const std::vector<std::size_t>& idx,
                               Tensor* masks = nullptr)
{
    std::vector<const Tensor*> images;
    std::vector<Tensor> ec, el, m;
    for (auto i : idx) {
        images.push_back(&set[i].image);
        ec.push_back(set[i].e_c);
        el.push_back(set[i].e_l);
        m.push_back(reshape(set[i].mask, {1, 1, set[i].mask.dim(1), set[i].mask.dim(2)}));
    }
    ForwardInput in;
    in.image = data::stack_images(images);
    in.e_c = concat(ec, 0);
    in.e_l = concat(el, 0);
    const std::size_t n_taps = set[idx[0]].taps.size();
    for (std::size_t t = 0; t < n_taps; ++t) {
        std::vector<Tensor> parts;
        for (auto i : idx)
            parts.push_back(set[i].taps[t]);
        in.vit_taps.push_back(concat(parts, 0));
    }
    if (masks)
        *masks = concat(m, 0);
    return in;
}

inline double dice_of(const Mask& pred, const Mask& truth)
{
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
        tp += pred.pixels[i] && truth.pixels[i];
        fp += pred.pixels[i] && !truth.pixels[i];
        fn += !pred.pixels[i] && truth.pixels[i];
    }
    if (tp + fp + fn == 0)
        return 1.0;
    return 2.0 * static_cast<double>(tp) / (2.0 * static_cast<double>(tp) + static_cast<double>(fp + fn) + 1e-8);
}

/// Mean Dice at tau = 0.5 over prepared samples, evaluated with their own
/// prompts.
inline double mean_dice(const XBusNet& net, const std::vector<PreparedSample>& set, std::size_t batch = 4)
{
    NoGradGuard no_grad;
    double total = 0.0;
    for (std::size_t start = 0; start < set.size(); start += batch) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(set.size(), start + batch); ++i)
            idx.push_back(i);
        const auto probs = probabilities(net.forward(make_batch(set, idx)));
        for (std::size_t j = 0; j < idx.size(); ++j)
            total += dice_of(binarize(probs[j], 0.5), set[idx[j]].binary_mask);
    }
    return total / static_cast<double>(set.size());
}

struct TrainResult {
    std::vector<double> loss_trace;
    prompt::SizeBins size_bins;
    std::size_t iterations_run = 0;
    bool stopped_early = false;
};

struct TrainHooks {
    /// Called after each step with (iteration, loss). Returning true stops.
    std::function<bool(std::size_t, double)> after_step;
};

/// Trains `net` on `train` for cfg.iterations AdamW steps with a cosine
/// schedule. Size bins are fitted on `train` only. `val_ids` are checked
/// for overlap with the training ids.
inline TrainResult train_fold(XBusNet& net, const std::vector<data::Sample>& train,
                              const std::vector<std::string>& val_ids, const TrainConfig& cfg,
                              const TrainHooks& hooks = {})
{
    validate(cfg);
    if (train.empty())
        throw ConfigError("training split is empty");
    std::vector<std::string> train_ids;
    std::vector<double> sizes;
    for (const auto& s : train) {
        train_ids.push_back(s.metadata.image_id);
        sizes.push_back(s.metadata.size_value);
        if (s.mask.empty())
            throw ConfigError("training sample '" + s.metadata.image_id + "' has an empty mask");
    }
    data::require_disjoint(train_ids, val_ids);

    TrainResult result;
    result.size_bins = prompt::fit_size_bins(sizes);
    std::vector<PreparedSample> set;
    set.reserve(train.size());
    for (const auto& s : train)
        set.push_back(prepare_sample(net, s, result.size_bins));

    auto& params = net.parameters();
    AdamW opt({.base_lr = cfg.base_lr, .weight_decay = cfg.weight_decay, .total_steps = cfg.iterations});
    Rng rng(mix_seed(cfg.seed, 0x7a1));
    std::vector<std::size_t> order(set.size());
    std::size_t cursor = order.size();
    const std::size_t B = std::min(cfg.batch_size, set.size());
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        std::vector<std::size_t> idx;
        while (idx.size() < B) {
            if (cursor == order.size()) {
                for (std::size_t i = 0; i < order.size(); ++i)
                    order[i] = i;
                rng.shuffle(order.begin(), order.end());
                cursor = 0;
            }
            idx.push_back(order[cursor++]);
        }
        Tensor masks;
        const auto in = make_batch(set, idx, &masks);
        const Tensor loss = segmentation_loss(net.forward(in), masks, {cfg.bce_weight, cfg.dice_weight});
        zero_grad(params);
        backward(loss);
        opt.step(params, cosine_lr(it, cfg.iterations, cfg.base_lr));
        result.loss_trace.push_back(loss.item());
        result.iterations_run = it + 1;
        if (hooks.after_step && hooks.after_step(it, loss.item())) {
            result.stopped_early = it + 1 < cfg.iterations;
            break;
        }
    }
    return result;
}

} // namespace xbus::model
