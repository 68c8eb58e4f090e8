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

#include <vector>

#include "xbus/core/image.hpp"
#include "xbus/core/ops.hpp"

namespace xbus::model {

/// Per-pixel foreground probability, row-major.
struct ProbabilityMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

/// sigmoid of each [1,H,W] slice of logits [B,1,H,W].
inline std::vector<ProbabilityMap> probabilities(const Tensor& logits)
{
    if (logits.rank() != 4 || logits.dim(1) != 1)
        throw ShapeError("expected logits [B,1,H,W], got " + to_string(logits.shape()));
    const std::size_t B = logits.dim(0), H = logits.dim(2), W = logits.dim(3);
    std::vector<ProbabilityMap> out(B);
    for (std::size_t b = 0; b < B; ++b) {
        out[b] = {H, W, std::vector<double>(H * W)};
        for (std::size_t i = 0; i < H * W; ++i)
            out[b].values[i] = sigmoid(logits.data()[b * H * W + i]);
    }
    return out;
}

/// 1 iff P >= tau.
inline Mask binarize(const ProbabilityMap& p, double tau = 0.5)
{
    if (!(tau >= 0.0 && tau <= 1.0))
        throw UsageError("threshold must lie in [0, 1], got " + std::to_string(tau));
    Mask m(p.height, p.width);
    for (std::size_t i = 0; i < p.values.size(); ++i)
        m.pixels[i] = p.values[i] >= tau ? 1 : 0;
    return m;
}

/// Largest 4-connected component. Equal sizes resolve to the component
/// whose first pixel comes first in raster order.
inline Mask largest_connected_component(const Mask& m)
{
    const std::size_t H = m.height, W = m.width;
    std::vector<std::size_t> label(H * W, 0);
    std::vector<std::size_t> sizes{0};
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < H * W; ++start) {
        if (!m.pixels[start] || label[start])
            continue;
        const std::size_t id = sizes.size();
        std::size_t n = 0;
        label[start] = id;
        stack.assign(1, start);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            ++n;
            const std::size_t y = p / W, x = p % W;
            auto visit = [&](std::size_t q) {
                if (m.pixels[q] && !label[q]) {
                    label[q] = id;
                    stack.push_back(q);
                }
            };
            if (y > 0)
                visit(p - W);
            if (y + 1 < H)
                visit(p + W);
            if (x > 0)
                visit(p - 1);
            if (x + 1 < W)
                visit(p + 1);
        }
        sizes.push_back(n);
    }
    std::size_t best = 0;
    for (std::size_t id = 1; id < sizes.size(); ++id)
        if (sizes[id] > sizes[best])
            best = id;
    Mask out(H, W);
    if (best == 0)
        return out;
    for (std::size_t i = 0; i < H * W; ++i)
        out.pixels[i] = label[i] == best ? 1 : 0;
    return out;
}

} // namespace xbus::model
