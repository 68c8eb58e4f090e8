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

// Prompt-conditioned channel-wise affine modulation of feature maps.

#pragma once

#include "xbus/nn/layers.hpp"

namespace xbus::model {

/// gamma and beta, each [B, C, 1, 1].
struct ModulationParams {
    Tensor gamma;
    Tensor beta;
};

/// Embedding [B, d] as a tensor. A plain vector is treated as batch 1.
inline Tensor embedding_tensor(const std::vector<std::vector<double>>& batch)
{
    if (batch.empty())
        throw ShapeError("empty embedding batch");
    const std::size_t d = batch[0].size();
    std::vector<double> v;
    v.reserve(batch.size() * d);
    for (const auto& e : batch) {
        if (e.size() != d)
            throw ShapeError("embedding lengths differ within batch");
        v.insert(v.end(), e.begin(), e.end());
    }
    return Tensor(Shape{batch.size(), d}, std::move(v));
}

/// Two-layer perceptron d -> hidden -> 2C whose last layer starts at zero.
class StageProjector {
public:
    StageProjector() = default;
    StageProjector(nn::ParamBuilder b, std::size_t embed_dim, std::size_t hidden, std::size_t channels)
      : channels_(channels), embed_dim_(embed_dim),
        fc1_(b.sub("fc1"), embed_dim, hidden), fc2_(b.sub("fc2"), hidden, 2 * channels, true, true)
    { }

    std::size_t channels() const { return channels_; }
    std::size_t embed_dim() const { return embed_dim_; }

    /// z = fc2(relu(fc1(e))), [B, 2C].
    Tensor project(const Tensor& e) const
    {
        if (e.rank() != 2 || e.dim(1) != embed_dim_)
            throw ShapeError("SFA projector expects [B, " + std::to_string(embed_dim_) + "] embedding, got "
                             + to_string(e.shape()));
        return fc2_(relu(fc1_(e)));
    }

    /// First C values of z are the scale offset, last C the shift.
    ModulationParams predict(const Tensor& e) const
    {
        const Tensor z = project(e);
        const std::size_t B = z.dim(0);
        const Tensor dgamma = slice(z, 1, 0, channels_);
        const Tensor beta = slice(z, 1, channels_, channels_);
        return {reshape(add_scalar(dgamma, 1.0), {B, channels_, 1, 1}),
                reshape(beta, {B, channels_, 1, 1})};
    }

private:
    std::size_t channels_ = 0;
    std::size_t embed_dim_ = 0;
    nn::Linear fc1_, fc2_;
};

inline ModulationParams predict_modulation(const Tensor& e, const StageProjector& proj)
{
    return proj.predict(e);
}

/// gamma * F + beta, broadcast over space.
inline Tensor apply_affine(const Tensor& f, const ModulationParams& m)
{
    if (f.rank() != 4 || m.gamma.rank() != 4 || f.dim(1) != m.gamma.dim(1) || f.dim(0) != m.gamma.dim(0))
        throw ShapeError("SFA: feature map " + to_string(f.shape()) + " does not match modulation "
                         + to_string(m.gamma.shape()));
    return add(mul(f, m.gamma), m.beta);
}

inline Tensor apply_residual(const Tensor& modulated, const Tensor& f)
{
    if (modulated.shape() != f.shape())
        throw ShapeError("SFA residual: " + to_string(modulated.shape()) + " vs " + to_string(f.shape()));
    return add(modulated, f);
}

/// One SFA site: a stage projector and the residual flag.
class Sfa {
public:
    Sfa() = default;
    Sfa(nn::ParamBuilder b, std::size_t embed_dim, std::size_t hidden, std::size_t channels, bool residual)
      : proj_(b, embed_dim, hidden, channels), residual_(residual)
    { }

    const StageProjector& projector() const { return proj_; }
    bool residual() const { return residual_; }

    Tensor operator()(const Tensor& f, const Tensor& e) const
    {
        const Tensor out = apply_affine(f, proj_.predict(e));
        return residual_ ? apply_residual(out, f) : out;
    }

private:
    StageProjector proj_;
    bool residual_ = false;
};

} // namespace xbus::model
