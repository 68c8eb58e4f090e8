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

#include "xbus/core/ops.hpp"

namespace xbus {

/// Projections of one attention layer. Weights are [D, D], biases [D].
struct AttentionWeights {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

/// softmax(Q K^T / sqrt(d_h)) V per head, heads concatenated and projected
/// by `wo`. `probs`, when given, receives the [B, heads, N, N] weights.
inline Tensor multi_head_self_attention(const Tensor& x, std::size_t heads,
                                        const AttentionWeights& p, Tensor* probs = nullptr)
{
    if (x.rank() != 3)
        throw ShapeError("attention expects [B, N, D], got " + to_string(x.shape()));
    const std::size_t B = x.dim(0), N = x.dim(1), D = x.dim(2);
    if (heads == 0 || D % heads != 0)
        throw ConfigError("token width " + std::to_string(D) + " not divisible by "
                          + std::to_string(heads) + " heads");
    const std::size_t dh = D / heads;

    auto split = [&](const Tensor& t) {
        return permute(reshape(t, Shape{B, N, heads, dh}), {0, 2, 1, 3});
    };
    const Tensor q = split(linear(x, p.wq, p.bq));
    const Tensor k = split(linear(x, p.wk, p.bk));
    const Tensor v = split(linear(x, p.wv, p.bv));

    const Tensor scores = scale(matmul(q, transpose_last(k)), 1.0 / std::sqrt(static_cast<double>(dh)));
    const Tensor attn = softmax(scores);
    if (probs)
        *probs = attn;
    const Tensor ctx = reshape(permute(matmul(attn, v), {0, 2, 1, 3}), Shape{B, N, D});
    return linear(ctx, p.wo, p.bo);
}

} // namespace xbus
