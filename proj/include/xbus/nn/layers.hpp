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

#include <optional>
#include <string>

#include "xbus/core/attention.hpp"
#include "xbus/core/conv.hpp"
#include "xbus/core/optim.hpp"

namespace xbus::nn {

/// Creates named, seeded parameters and registers them in a ParameterList.
/// Layers keep handles to the same storage, so optimizer updates are visible
/// to them directly.
class ParamBuilder {
public:
    ParamBuilder(ParameterList& list, std::uint64_t seed, std::string prefix = {},
                 bool frozen = false)
      : list_(&list), seed_(seed), prefix_(std::move(prefix)), frozen_(frozen)
    { }

    ParamBuilder sub(const std::string& name) const
    {
        return ParamBuilder(*list_, seed_, qualified(name), frozen_);
    }

    ParamBuilder with_frozen(bool frozen) const
    {
        return ParamBuilder(*list_, seed_, prefix_, frozen);
    }

    bool frozen() const { return frozen_; }
    const std::string& prefix() const { return prefix_; }

    Tensor uniform(const std::string& name, Shape shape, std::size_t fan_in)
    {
        const auto full = qualified(name);
        return add(full, init_uniform(std::move(shape), fan_in, seed_, full));
    }

    Tensor normal(const std::string& name, Shape shape, double stddev)
    {
        const auto full = qualified(name);
        return add(full, init_normal(std::move(shape), stddev, seed_, full));
    }

    Tensor constant(const std::string& name, Shape shape, double value)
    {
        return add(qualified(name), Tensor(std::move(shape), value));
    }

private:
    std::string qualified(const std::string& name) const
    {
        return prefix_.empty() ? name : prefix_ + "." + name;
    }

    Tensor add(const std::string& full, Tensor t)
    {
        t.set_requires_grad(!frozen_);
        list_->push_back({full, t, frozen_});
        return t;
    }

    ParameterList* list_;
    std::uint64_t seed_;
    std::string prefix_;
    bool frozen_;
};

struct Linear {
    Tensor weight, bias;

    Linear() = default;
    Linear(ParamBuilder b, std::size_t in, std::size_t out, bool with_bias = true,
           bool zero_init = false)
    {
        weight = zero_init ? b.constant("weight", {out, in}, 0.0) : b.uniform("weight", {out, in}, in);
        if (with_bias)
            bias = b.constant("bias", {out}, 0.0);
    }

    Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
};

struct Conv2d {
    Tensor weight, bias;
    ConvGeometry geo;

    Conv2d() = default;
    Conv2d(ParamBuilder b, std::size_t in, std::size_t out, std::size_t kernel,
           ConvGeometry g = {}, bool with_bias = true)
      : geo(g)
    {
        weight = b.uniform("weight", {out, in, kernel, kernel}, in * kernel * kernel);
        if (with_bias)
            bias = b.constant("bias", {out}, 0.0);
    }

    /// 3x3, stride `s`, padding 1.
    static Conv2d same3x3(ParamBuilder b, std::size_t in, std::size_t out, std::size_t s = 1)
    {
        return Conv2d(b, in, out, 3, {s, 1});
    }

    Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, geo); }
};

struct ConvTranspose2d {
    Tensor weight, bias;
    ConvGeometry geo;

    ConvTranspose2d() = default;
    ConvTranspose2d(ParamBuilder b, std::size_t in, std::size_t out, std::size_t kernel,
                    ConvGeometry g = {})
      : geo(g)
    {
        weight = b.uniform("weight", {in, out, kernel, kernel}, in * kernel * kernel / (g.stride * g.stride));
        bias = b.constant("bias", {out}, 0.0);
    }

    Tensor operator()(const Tensor& x) const { return conv_transpose2d(x, weight, bias, geo); }
};

struct LayerNorm {
    Tensor gamma, beta;

    LayerNorm() = default;
    LayerNorm(ParamBuilder b, std::size_t dim)
      : gamma(b.constant("gamma", {dim}, 1.0)), beta(b.constant("beta", {dim}, 0.0))
    { }

    Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
};

/// Pre-norm transformer encoder block: x + MHSA(LN(x)), then x + MLP(LN(x)).
struct TransformerBlock {
    LayerNorm ln1, ln2;
    Linear q, k, v, o, fc1, fc2;
    std::size_t heads = 1;

    TransformerBlock() = default;
    TransformerBlock(ParamBuilder b, std::size_t dim, std::size_t n_heads, std::size_t mlp_ratio = 4)
      : ln1(b.sub("ln1"), dim), ln2(b.sub("ln2"), dim),
        q(b.sub("attn.q"), dim, dim), k(b.sub("attn.k"), dim, dim), v(b.sub("attn.v"), dim, dim),
        o(b.sub("attn.o"), dim, dim), fc1(b.sub("mlp.fc1"), dim, dim * mlp_ratio),
        fc2(b.sub("mlp.fc2"), dim * mlp_ratio, dim), heads(n_heads)
    {
        if (n_heads == 0 || dim % n_heads != 0)
            throw ConfigError("transformer width " + std::to_string(dim)
                              + " not divisible by heads " + std::to_string(n_heads));
    }

    AttentionWeights attention() const
    {
        return {q.weight, q.bias, k.weight, k.bias, v.weight, v.bias, o.weight, o.bias};
    }

    Tensor operator()(const Tensor& x, Tensor* probs = nullptr) const
    {
        const Tensor h = x + multi_head_self_attention(ln1(x), heads, attention(), probs);
        return h + fc2(gelu(fc1(ln2(h))));
    }
};

/// relu(conv(relu(conv(x))) + skip(x)) with 3x3 convolutions; a 1x1
/// projection carries the skip when widths differ.
struct ResidualBlock {
    Conv2d c1, c2;
    std::optional<Conv2d> proj;

    ResidualBlock() = default;
    ResidualBlock(ParamBuilder b, std::size_t in, std::size_t out)
      : c1(Conv2d::same3x3(b.sub("conv1"), in, out)), c2(Conv2d::same3x3(b.sub("conv2"), out, out))
    {
        if (in != out)
            proj = Conv2d(b.sub("proj"), in, out, 1);
    }

    Tensor operator()(const Tensor& x) const
    {
        const Tensor skip = proj ? (*proj)(x) : x;
        return relu(c2(relu(c1(x))) + skip);
    }
};

} // namespace xbus::nn
