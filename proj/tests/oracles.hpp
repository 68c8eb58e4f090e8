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

// Independent reference implementations used only by tests. Nothing here
// calls into the code paths it is used to check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "xbus/core/rng.hpp"
#include "xbus/core/tensor.hpp"

namespace xbus::testing {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0)
{
    Rng rng(seed * 7919 + 17);
    std::vector<double> v(numel(shape));
    for (double& x : v)
        x = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(v));
}

inline std::vector<double> naive_matmul(std::span<const double> a, std::span<const double> b,
                                        std::size_t m, std::size_t k, std::size_t n)
{
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t t = 0; t < k; ++t)
                c[i * n + j] += a[i * k + t] * b[t * n + j];
    return c;
}

/// Direct sliding-window cross-correlation.
inline std::vector<double> naive_conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
                                        std::size_t stride, std::size_t pad)
{
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    const std::size_t B = xs[0], C = xs[1], H = xs[2], W = xs[3], O = ws[0], kh = ws[2],
                      kw = ws[3];
    const std::size_t oh = (H + 2 * pad - kh) / stride + 1, ow = (W + 2 * pad - kw) / stride + 1;
    std::vector<double> out(B * O * oh * ow, 0.0);
    for (std::size_t n = 0; n < B; ++n)
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t z = 0; z < ow; ++z) {
                    double acc = b.defined() ? b.data()[o] : 0.0;
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t i = 0; i < kh; ++i)
                            for (std::size_t j = 0; j < kw; ++j) {
                                const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                                const long ix = static_cast<long>(z * stride + j) - static_cast<long>(pad);
                                if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W))
                                    continue;
                                acc += x.data()[((n * C + c) * H + iy) * W + ix]
                                       * w.data()[((o * C + c) * kh + i) * kw + j];
                            }
                    out[((n * O + o) * oh + y) * ow + z] = acc;
                }
    return out;
}

/// Transposed convolution by explicit scatter: every input pixel stamps a
/// weighted kernel onto the output grid. No bias.
inline std::vector<double> scatter_conv_transpose(const Tensor& x, const Tensor& w,
                                                  std::size_t stride, std::size_t pad)
{
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    const std::size_t B = xs[0], C = xs[1], H = xs[2], W = xs[3], O = ws[1], kh = ws[2],
                      kw = ws[3];
    const std::size_t oh = (H - 1) * stride + kh - 2 * pad, ow = (W - 1) * stride + kw - 2 * pad;
    std::vector<double> out(B * O * oh * ow, 0.0);
    for (std::size_t n = 0; n < B; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t z = 0; z < W; ++z)
                    for (std::size_t o = 0; o < O; ++o)
                        for (std::size_t i = 0; i < kh; ++i)
                            for (std::size_t j = 0; j < kw; ++j) {
                                const long ty = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                                const long tz = static_cast<long>(z * stride + j) - static_cast<long>(pad);
                                if (ty < 0 || tz < 0 || ty >= static_cast<long>(oh) || tz >= static_cast<long>(ow))
                                    continue;
                                out[((n * O + o) * oh + ty) * ow + tz]
                                    += x.data()[((n * C + c) * H + y) * W + z]
                                       * w.data()[((c * O + o) * kh + i) * kw + j];
                            }
    return out;
}

/// Quantile by linear interpolation between order statistics (type 7).
inline double quantile_type7(std::vector<double> v, double q)
{
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Two-sided exact Wilcoxon p-value by enumerating all 2^n sign flips of
/// the given ranks and counting outcomes at least as extreme as `w_plus`.
inline double enumerate_wilcoxon_p(const std::vector<double>& ranks, double w_plus)
{
    const std::size_t n = ranks.size();
    double total = 0.0;
    for (double r : ranks)
        total += r;
    const double observed = std::min(w_plus, total - w_plus);
    std::uint64_t extreme = 0;
    const std::uint64_t count = std::uint64_t{1} << n;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::uint64_t{1} << i))
                s += ranks[i];
        if (s <= observed + 1e-9)
            ++extreme;
    }
    return std::min(1.0, 2.0 * static_cast<double>(extreme) / static_cast<double>(count));
}

/// Ranks of |d| with midranks for ties (1-based).
inline std::vector<double> midranks_of_abs(const std::vector<double>& d)
{
    std::vector<double> ranks(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        double below = 0.0, equal = 0.0;
        for (std::size_t j = 0; j < d.size(); ++j) {
            if (std::abs(d[j]) < std::abs(d[i]))
                below += 1.0;
            else if (std::abs(d[j]) == std::abs(d[i]))
                equal += 1.0;
        }
        ranks[i] = below + (equal + 1.0) / 2.0;
    }
    return ranks;
}

/// 4-connected component sizes by recursive-free flood fill; returns a
/// label image (0 = background, labels in raster order of first pixel).
inline std::vector<int> flood_fill_labels(const std::vector<std::uint8_t>& mask, int h, int w)
{
    std::vector<int> label(mask.size(), 0);
    int next = 0;
    for (int start = 0; start < h * w; ++start) {
        if (!mask[start] || label[start])
            continue;
        ++next;
        std::vector<int> todo{start};
        label[start] = next;
        while (!todo.empty()) {
            const int p = todo.back();
            todo.pop_back();
            const int y = p / w, x = p % w;
            const int nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
            for (const auto& q : nb) {
                if (q[0] < 0 || q[1] < 0 || q[0] >= h || q[1] >= w)
                    continue;
                const int k = q[0] * w + q[1];
                if (mask[k] && !label[k]) {
                    label[k] = next;
                    todo.push_back(k);
                }
            }
        }
    }
    return label;
}

} // namespace xbus::testing
