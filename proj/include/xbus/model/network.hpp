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

#include <memory>

#include "xbus/core/checkpoint.hpp"
#include "xbus/model/gfe.hpp"
#include "xbus/model/lfe.hpp"

namespace xbus::model {

/// Inputs for one batched forward pass.
struct ForwardInput {
    Tensor image;                   // [B,3,H,W]
    Tensor e_c;                     // [B,d]
    Tensor e_l;                     // [B,d]
    std::vector<Tensor> vit_taps;   // optional precomputed ViT token stacks
};

struct ForwardOptions {
    bool modulate = true;           // false: every SFA site is bypassed
    FeatureTrace* trace = nullptr;
};

/// Fusion head: two residual blocks and a 1x1 convolution to one logit.
class FusionHead {
public:
    FusionHead() = default;
    FusionHead(nn::ParamBuilder b, std::size_t channels)
      : rb1_(b.sub("rb1"), channels, channels), rb2_(b.sub("rb2"), channels, channels),
        out_(b.sub("out"), channels, 1, 1)
    { }

    Tensor operator()(const Tensor& f_cat, FeatureTrace* trace = nullptr) const
    {
        const Tensor fused = rb2_(rb1_(f_cat));
        record(trace, "F_fused", fused);
        return out_(fused);
    }

private:
    nn::ResidualBlock rb1_, rb2_;
    nn::Conv2d out_;
};

/// The full dual-branch network plus its frozen text encoder. Owns every
/// parameter; layers share storage with the list entries.
class XBusNet {
public:
    explicit XBusNet(ModelConfig cfg) : cfg_(std::move(cfg))
    {
        validate(cfg_);
        params_ = std::make_unique<ParameterList>();
        nn::ParamBuilder root(*params_, cfg_.seed);
        text_ = std::make_unique<prompt::TextEncoder>(root.sub("text"), cfg_.text);
        gfe_ = GlobalFeatureExtractor(root.sub("gfe"), cfg_);
        lfe_ = LocalFeatureExtractor(root.sub("lfe"), root.sub("sfa"), cfg_);
        const std::size_t d = cfg_.text.dim, hidden = cfg_.sfa.hidden ? cfg_.sfa.hidden : d;
        sfa_global_ = Sfa(root.sub("sfa").sub("global"), d, hidden, cfg_.global_channels,
                          cfg_.sfa.residual_global);
        fusion_ = FusionHead(root.sub("fusion"), cfg_.fused_channels());
    }

    const ModelConfig& config() const { return cfg_; }
    ParameterList& parameters() { return *params_; }
    const ParameterList& parameters() const { return *params_; }
    const prompt::TextEncoder& text_encoder() const { return *text_; }
    const GlobalFeatureExtractor& gfe() const { return gfe_; }
    const LocalFeatureExtractor& lfe() const { return lfe_; }
    const Sfa& global_sfa() const { return sfa_global_; }

    /// Logits [B,1,H,W].
    Tensor forward(const ForwardInput& in, const ForwardOptions& opt = {}) const
    {
        const auto s = cfg_.image_size();
        if (in.image.rank() != 4 || in.image.dim(2) != s || in.image.dim(3) != s)
            throw ShapeError("network expects images of " + std::to_string(s) + "x" + std::to_string(s)
                             + ", got " + to_string(in.image.shape()));
        const std::size_t B = in.image.dim(0);
        if (in.e_c.rank() != 2 || in.e_l.rank() != 2 || in.e_c.dim(0) != B || in.e_l.dim(0) != B)
            throw ShapeError("prompt embeddings must be [B,d] with B = " + std::to_string(B));
        auto* trace = opt.trace;

        const auto taps = in.vit_taps.empty() ? gfe_.taps(in.image) : in.vit_taps;
        const Tensor f_g = gfe_.forward_from_taps(taps, in.e_c);
        record(trace, "F_g", f_g);
        const Tensor f_g_hat = opt.modulate ? sfa_global_(f_g, in.e_c) : f_g;
        record(trace, "F_g^", f_g_hat);

        const Tensor f_l = lfe_(in.image, in.e_l, opt.modulate, trace);
        if (f_g_hat.dim(2) != f_l.dim(2) || f_g_hat.dim(3) != f_l.dim(3))
            throw ShapeError("branch grids differ: F_g " + to_string(f_g_hat.shape()) + ", F_l "
                             + to_string(f_l.shape()));
        const Tensor f_cat = concat_channels({f_g_hat, f_l});
        record(trace, "F_cat", f_cat);
        const Tensor grid_logits = fusion_(f_cat, trace);
        record(trace, "logits_grid", grid_logits);
        const Tensor logits = bilinear_upsample(grid_logits, s, s);
        record(trace, "logits", logits);
        return logits;
    }

    Checkpoint checkpoint() const
    {
        auto ck = snapshot(*params_);
        for (const auto& [k, v] : to_config_map(cfg_))
            ck.metadata[k] = v;
        return ck;
    }

    void load(const Checkpoint& ck) { restore_parameters(*params_, ck); }

private:
    ModelConfig cfg_;
    std::unique_ptr<ParameterList> params_;
    std::unique_ptr<prompt::TextEncoder> text_;
    GlobalFeatureExtractor gfe_;
    LocalFeatureExtractor lfe_;
    Sfa sfa_global_;
    FusionHead fusion_;
};

/// Rebuilds a network from a checkpoint's stored configuration and weights.
inline XBusNet load_network(const Checkpoint& ck)
{
    ModelConfig m;
    TrainConfig unused;
    ConfigMap map;
    for (const auto& [k, v] : ck.metadata)
        if (k.rfind("model.", 0) == 0 || k.rfind("gfe.", 0) == 0 || k.rfind("text.", 0) == 0
            || k.rfind("lfe.", 0) == 0 || k.rfind("sfa.", 0) == 0)
            map[k] = v;
    apply_config(map, m, unused);
    XBusNet net(m);
    net.load(ck);
    return net;
}

} // namespace xbus::model
