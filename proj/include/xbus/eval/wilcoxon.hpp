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

// Paired Wilcoxon signed-rank test with rank-biserial effect size.
//
// Zero differences are dropped and tied |d| share their midrank. Midranks
// are multiples of 1/2, so the exact null distribution is computed over
// doubled (integer) ranks with a subset-sum count.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "xbus/core/errors.hpp"

namespace xbus::eval {

inline constexpr std::size_t kExactWilcoxonMaxN = 20;

struct PairedTestResult {
    double w = 0;        // min(W+, W-)
    double w_plus = 0;
    double w_minus = 0;
    double p = 1;        // two-sided
    double r_rb = 0;     // (W+ - W-) / (W+ + W-)
    std::size_t n = 0;   // after dropping zeros
    bool exact = true;
};

/// 1-based ranks of |d| with midranks for ties.
inline std::vector<double> midranks(const std::vector<double>& d)
{
    const std::size_t n = d.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]]))
            ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

/// Exact two-sided p = min(1, 2 P(T <= w)) where T is the positive-rank sum
/// under random signs.
inline double exact_signed_rank_p(const std::vector<double>& ranks, double w)
{
    std::vector<std::size_t> doubled;
    std::size_t total = 0;
    for (double r : ranks) {
        doubled.push_back(static_cast<std::size_t>(std::lround(2.0 * r)));
        total += doubled.back();
    }
    std::vector<double> ways(total + 1, 0.0);
    ways[0] = 1.0;
    for (auto r : doubled)
        for (std::size_t s = total; s >= r; --s) {
            ways[s] += ways[s - r];
            if (s == r)
                break;
        }
    const auto limit = static_cast<std::size_t>(std::lround(2.0 * w));
    double below = 0.0;
    for (std::size_t s = 0; s <= std::min(limit, total); ++s)
        below += ways[s];
    return std::min(1.0, 2.0 * below / std::ldexp(1.0, static_cast<int>(ranks.size())));
}

/// Normal approximation with continuity and tie correction.
inline double normal_signed_rank_p(const std::vector<double>& ranks, double w)
{
    const double n = static_cast<double>(ranks.size());
    const double mean = n * (n + 1.0) / 4.0;
    double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    std::vector<double> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i])
            ++j;
        const double t = static_cast<double>(j - i);
        var -= (t * t * t - t) / 48.0;
        i = j;
    }
    if (var <= 0.0)
        return 1.0;
    const double z = (std::abs(w - mean) - 0.5) / std::sqrt(var);
    const double p = std::erfc(std::max(z, 0.0) / std::sqrt(2.0));
    return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

inline PairedTestResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size())
        throw UsageError("wilcoxon_signed_rank: paired lists differ in length");
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] - b[i] != 0.0)
            d.push_back(a[i] - b[i]);
    if (d.empty())
        throw UndefinedTestError("wilcoxon_signed_rank: no non-zero differences");

    const auto ranks = midranks(d);
    PairedTestResult r;
    r.n = d.size();
    for (std::size_t i = 0; i < d.size(); ++i)
        (d[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];
    r.w = std::min(r.w_plus, r.w_minus);
    r.r_rb = (r.w_plus - r.w_minus) / (r.w_plus + r.w_minus);
    r.exact = r.n <= kExactWilcoxonMaxN;
    r.p = r.exact ? exact_signed_rank_p(ranks, r.w) : normal_signed_rank_p(ranks, r.w);
    return r;
}

/// Differences given directly (b = 0).
inline PairedTestResult wilcoxon_signed_rank(const std::vector<double>& diffs)
{
    return wilcoxon_signed_rank(diffs, std::vector<double>(diffs.size(), 0.0));
}

} // namespace xbus::eval
