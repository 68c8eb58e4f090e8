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

// Local branch: residual encoder, transformer blocks on the two deepest
// maps, U-Net decoder with SFA at four sites, projection to 32 channels.

#pragma once

#include <array>
#include <map>

#include "xbus/model/config.hpp"
#include "xbus/model/sfa.hpp"

namespace xbus::model {

/// Named intermediate feature maps captured during a forward pass.
using FeatureTrace = std::map<std::string, Tensor>;

inline void record(FeatureTrace* trace, const std::string& name, const Tensor& t)
{
    if (trace)
        (*trace)[name] = t;
}

struct EncoderPyramid {
    std::array<Tensor, 5> enc; // enc1..enc5 at strides 2..32
};

/// [B,C,h,w] -> tokens -> transformer block -> [B,C,h,w].
class SpatialTransformer {
public:
    SpatialTransformer() = default;
    SpatialTransformer(nn::ParamBuilder b, std::size_t channels, std::size_t heads)
      : block_(b, channels, heads)
    { }

    Tensor operator()(const Tensor& f, Tensor* probs = nullptr) const
    {
        if (f.rank() != 4)
            throw ShapeError("spatial transformer expects [B,C,h,w], got " + to_string(f.shape()));
        const std::size_t B = f.dim(0), C = f.dim(1), h = f.dim(2), w = f.dim(3);
        const Tensor tokens = permute(reshape(f, {B, C, h * w}), {0, 2, 1});
        return reshape(permute(block_(tokens, probs), {0, 2, 1}), {B, C, h, w});
    }

private:
    nn::TransformerBlock block_;
};

/// Bilinear 2x, concat skip, two 3x3 conv + ReLU.
class UpBlock {
public:
    UpBlock() = default;
    UpBlock(nn::ParamBuilder b, std::size_t in, std::size_t skip, std::size_t out)
      : skip_(skip), c1_(nn::Conv2d::same3x3(b.sub("conv1"), in + skip, out)),
        c2_(nn::Conv2d::same3x3(b.sub("conv2"), out, out))
    { }

    Tensor operator()(const Tensor& x, const Tensor& skip) const
    {
        if (skip.dim(1) != skip_)
            throw ShapeError("up block skip has " + std::to_string(skip.dim(1)) + " channels, expected "
                             + std::to_string(skip_));
        const Tensor up = bilinear_upsample(x, skip.dim(2), skip.dim(3));
        return relu(c2_(relu(c1_(concat_channels({up, skip})))));
    }

private:
    std::size_t skip_ = 0;
    nn::Conv2d c1_, c2_;
};

class LocalFeatureExtractor {
public:
    static constexpr std::array<const char*, 4> kSfaSites{"enc4", "dec4", "dec3", "dec2"};

    LocalFeatureExtractor() = default;
    LocalFeatureExtractor(nn::ParamBuilder b, nn::ParamBuilder sfa, const ModelConfig& cfg)
      : image_size_(cfg.vit.image_size), grid_(cfg.feature_grid())
    {
        const auto& w = cfg.lfe.widths;
        const std::size_t d = cfg.text.dim, hidden = cfg.sfa.hidden ? cfg.sfa.hidden : d;
        std::size_t in = 3;
        for (std::size_t k = 0; k < 5; ++k) {
            const auto stage = b.sub("enc" + std::to_string(k + 1));
            down_[k] = nn::Conv2d::same3x3(stage.sub("down"), in, w[k], 2);
            block_[k] = nn::ResidualBlock(stage.sub("block"), w[k], w[k]);
            in = w[k];
        }
        trenc4_ = SpatialTransformer(b.sub("trenc4"), w[3], cfg.lfe.heads);
        trenc5_ = SpatialTransformer(b.sub("trenc5"), w[4], cfg.lfe.heads);
        up_[3] = UpBlock(b.sub("up4"), w[4], w[3], w[3]);
        up_[2] = UpBlock(b.sub("up3"), w[3], w[2], w[2]);
        up_[1] = UpBlock(b.sub("up2"), w[2], w[1], w[1]);
        up_[0] = UpBlock(b.sub("up1"), w[1], w[0], w[0]);
        const std::array<std::size_t, 4> sfa_width{w[3], w[3], w[2], w[1]};
        for (std::size_t i = 0; i < 4; ++i)
            sfa_[i] = Sfa(sfa.sub(kSfaSites[i]), d, hidden, sfa_width[i], cfg.sfa.residual_local);

        // dec1 sits at half the input size; bring it to the global grid.
        const std::size_t dec1 = image_size_ / 2;
        if (dec1 > grid_)
            final_down_ = nn::Conv2d(b.sub("final"), w[0], cfg.local_channels, dec1 / grid_,
                                     {dec1 / grid_, 0});
        else if (dec1 < grid_)
            final_up_ = nn::ConvTranspose2d(b.sub("final"), w[0], cfg.local_channels, grid_ / dec1,
                                            {grid_ / dec1, 0});
        else
            final_down_ = nn::Conv2d(b.sub("final"), w[0], cfg.local_channels, 1);
    }

    const Sfa& sfa(std::size_t site) const { return sfa_.at(site); }

    EncoderPyramid encode(const Tensor& image) const
    {
        if (image.rank() != 4 || image.dim(1) != 3 || image.dim(2) % 32 != 0 || image.dim(3) % 32 != 0)
            throw ShapeError("local encoder expects [B,3,H,W] with H,W divisible by 32, got "
                             + to_string(image.shape()));
        EncoderPyramid p;
        Tensor x = image;
        for (std::size_t k = 0; k < 5; ++k) {
            x = block_[k](relu(down_[k](x)));
            p.enc[k] = x;
        }
        return p;
    }

    /// (enc4', center').
    std::pair<Tensor, Tensor> apply_deep_transformers(const Tensor& enc4, const Tensor& enc5) const
    {
        return {trenc4_(enc4), trenc5_(enc5)};
    }

    /// Decoder from the pyramid. With `modulate` false every SFA site is
    /// skipped, giving the plain U-Net pass on the same weights.
    Tensor decode(const EncoderPyramid& p, const Tensor& e_l, bool modulate = true,
                  FeatureTrace* trace = nullptr) const
    {
        auto site = [&](std::size_t i, const Tensor& f) {
            const Tensor out = modulate ? sfa_[i](f, e_l) : f;
            record(trace, std::string("lfe.") + kSfaSites[i] + "*", out);
            return out;
        };
        const auto [enc4p, center] = apply_deep_transformers(p.enc[3], p.enc[4]);
        record(trace, "lfe.enc4'", enc4p);
        record(trace, "lfe.center'", center);
        const Tensor enc4s = site(0, enc4p);
        const Tensor dec4 = site(1, up_[3](center, enc4s));
        const Tensor dec3 = site(2, up_[2](dec4, p.enc[2]));
        const Tensor dec2 = site(3, up_[1](dec3, p.enc[1]));
        const Tensor dec1 = up_[0](dec2, p.enc[0]);
        record(trace, "lfe.dec1", dec1);
        const Tensor f_l = final_up_.weight.defined() ? final_up_(dec1) : final_down_(dec1);
        record(trace, "F_l", f_l);
        return f_l;
    }

    Tensor operator()(const Tensor& image, const Tensor& e_l, bool modulate = true,
                      FeatureTrace* trace = nullptr) const
    {
        return decode(encode(image), e_l, modulate, trace);
    }

private:
    std::size_t image_size_ = 0, grid_ = 0;
    std::array<nn::Conv2d, 5> down_;
    std::array<nn::ResidualBlock, 5> block_;
    SpatialTransformer trenc4_, trenc5_;
    std::array<UpBlock, 4> up_;
    std::array<Sfa, 4> sfa_;
    nn::Conv2d final_down_;
    nn::ConvTranspose2d final_up_;
};

} // namespace xbus::model
