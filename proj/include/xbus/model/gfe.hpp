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

// Global branch: frozen ViT token taps, per-layer reduction and sum,
// prompt conditioning of the reduced tokens, projection to a 64-channel map.

#pragma once

#include <cmath>

#include "xbus/model/config.hpp"
#include "xbus/nn/layers.hpp"

namespace xbus::model {

/// Frozen ViT. Returns the token stacks after the configured blocks.
class VisionTransformer {
public:
    VisionTransformer() = default;
    VisionTransformer(nn::ParamBuilder b, const ViTConfig& cfg) : cfg_(cfg)
    {
        auto fb = b.with_frozen(true);
        patch_ = nn::Conv2d(fb.sub("patch_embed"), 3, cfg.dim, cfg.patch_size, {cfg.patch_size, 0});
        cls_ = fb.normal("cls_token", {1, 1, cfg.dim}, 0.02);
        pos_ = fb.normal("pos_embed", {1, cfg.num_tokens(), cfg.dim}, 0.02);
        for (std::size_t i = 0; i < cfg.depth; ++i)
            blocks_.emplace_back(fb.sub("blocks." + std::to_string(i + 1)), cfg.dim, cfg.heads);
    }

    const ViTConfig& config() const { return cfg_; }

    /// Z^(j) for j in tap_layers, each [B, N, D], in tap order.
    std::vector<Tensor> forward(const Tensor& image) const
    {
        const auto s = cfg_.image_size;
        if (image.rank() != 4 || image.dim(1) != 3 || image.dim(2) != s || image.dim(3) != s)
            throw ShapeError("ViT expects [B,3," + std::to_string(s) + "," + std::to_string(s)
                             + "], got " + to_string(image.shape()));
        NoGradGuard frozen;
        const std::size_t B = image.dim(0), D = cfg_.dim, P = cfg_.grid() * cfg_.grid();
        const Tensor patches = permute(reshape(patch_(image), {B, D, P}), {0, 2, 1});
        std::vector<double> cls(B * D);
        for (std::size_t b = 0; b < B; ++b)
            std::copy(cls_.data().begin(), cls_.data().end(), cls.begin() + static_cast<std::ptrdiff_t>(b * D));
        Tensor z = add(concat({Tensor(Shape{B, 1, D}, std::move(cls)), patches}, 1), pos_);
        std::vector<Tensor> taps;
        for (std::size_t j = 1; j <= blocks_.size(); ++j) {
            z = blocks_[j - 1](z);
            for (auto t : cfg_.tap_layers)
                if (t == j)
                    taps.push_back(z);
        }
        return taps;
    }

private:
    ViTConfig cfg_;
    nn::Conv2d patch_;
    Tensor cls_, pos_;
    std::vector<nn::TransformerBlock> blocks_;
};

/// A = sum_j W^(j) Z^(j)[:, 1:, :] with bias-free reducers W^(j): D -> r.
inline Tensor reduce_aggregate(const std::vector<Tensor>& stacks, const std::vector<Tensor>& reducers)
{
    if (stacks.empty() || stacks.size() != reducers.size())
        throw ShapeError("reduce_aggregate: " + std::to_string(stacks.size()) + " stacks, "
                         + std::to_string(reducers.size()) + " reducers");
    const Shape& first = stacks[0].shape();
    if (first.size() != 3 || first[1] < 2)
        throw ShapeError("token stack must be [B,N,D] with N >= 2, got " + to_string(first));
    Tensor acc;
    for (std::size_t j = 0; j < stacks.size(); ++j) {
        if (stacks[j].shape() != first)
            throw ShapeError("token stacks differ: " + to_string(stacks[j].shape()) + " vs " + to_string(first));
        const Tensor patch_tokens = slice(stacks[j], 1, 1, first[1] - 1);
        const Tensor reduced = linear(patch_tokens, reducers[j]);
        acc = j == 0 ? reduced : add(acc, reduced);
    }
    return acc;
}

/// c = W_c e_c; A~ = (W_mul c) * A + W_add c, broadcast over tokens.
inline Tensor condition_tokens(const Tensor& a, const Tensor& e_c, const Tensor& w_c,
                               const Tensor& w_mul, const Tensor& w_add)
{
    if (a.rank() != 3)
        throw ShapeError("condition_tokens: A must be [B,T,r], got " + to_string(a.shape()));
    if (e_c.rank() != 2 || e_c.dim(1) != w_c.dim(1) || e_c.dim(0) != a.dim(0))
        throw ShapeError("condition_tokens: embedding " + to_string(e_c.shape())
                         + " does not match W_c " + to_string(w_c.shape()));
    const std::size_t B = a.dim(0), r = a.dim(2);
    const Tensor c = linear(e_c, w_c);
    const Tensor scale = reshape(linear(c, w_mul), {B, 1, r});
    const Tensor shift = reshape(linear(c, w_add), {B, 1, r});
    return add(mul(scale, a), shift);
}

/// Reshapes [B, g*g, r] into [B, r, g, g].
inline Tensor tokens_to_grid(const Tensor& tokens)
{
    const std::size_t B = tokens.dim(0), T = tokens.dim(1), r = tokens.dim(2);
    const auto g = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(T))));
    if (g * g != T)
        throw ShapeError("token count " + std::to_string(T) + " is not a perfect square");
    return reshape(permute(tokens, {0, 2, 1}), {B, r, g, g});
}

class GlobalFeatureExtractor {
public:
    GlobalFeatureExtractor() = default;
    GlobalFeatureExtractor(nn::ParamBuilder b, const ModelConfig& cfg)
      : vit_(b.sub("vit"), cfg.vit)
    {
        const std::size_t D = cfg.vit.dim, r = cfg.vit.reduce_dim, d = cfg.text.dim;
        for (std::size_t j = 0; j < cfg.vit.tap_layers.size(); ++j)
            reducers_.push_back(b.uniform("reduce." + std::to_string(cfg.vit.tap_layers[j]) + ".weight",
                                          {r, D}, D));
        w_c_ = b.uniform("condition.c.weight", {r, d}, d);
        w_mul_ = b.uniform("condition.mul.weight", {r, r}, r);
        w_add_ = b.uniform("condition.add.weight", {r, r}, r);
        project_ = nn::ConvTranspose2d(b.sub("project"), r, cfg.global_channels, 2, {2, 0});
    }

    const VisionTransformer& vit() const { return vit_; }

    std::vector<Tensor> taps(const Tensor& image) const { return vit_.forward(image); }

    Tensor reduce(const std::vector<Tensor>& stacks) const { return reduce_aggregate(stacks, reducers_); }

    Tensor condition(const Tensor& a, const Tensor& e_c) const
    {
        return condition_tokens(a, e_c, w_c_, w_mul_, w_add_);
    }

    /// F_g = [B, 64, 2g, 2g].
    Tensor project_to_grid(const Tensor& conditioned) const { return project_(tokens_to_grid(conditioned)); }

    Tensor forward_from_taps(const std::vector<Tensor>& stacks, const Tensor& e_c) const
    {
        return project_to_grid(condition(reduce(stacks), e_c));
    }

    Tensor operator()(const Tensor& image, const Tensor& e_c) const
    {
        return forward_from_taps(taps(image), e_c);
    }

private:
    VisionTransformer vit_;
    std::vector<Tensor> reducers_;
    Tensor w_c_, w_mul_, w_add_;
    nn::ConvTranspose2d project_;
};

} // namespace xbus::model
