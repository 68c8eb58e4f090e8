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

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "xbus/core/errors.hpp"
#include "xbus/eval/metrics.hpp"

namespace xbus::eval {

/// Unweighted per-metric means within one fold.
struct FoldSummary {
    std::size_t fold_index = 0;
    std::size_t n = 0;
    double dice = 0, iou = 0, fpr = 0, fnr = 0;
};

struct MeanSd {
    double mean = 0;
    double sd = 0; // sample SD; 0 for a single value
};

struct CrossFoldSummary {
    std::size_t folds = 0;
    MeanSd dice, iou, fpr, fnr;
};

inline FoldSummary fold_mean(const std::vector<ImageMetrics>& metrics, std::size_t fold_index = 0)
{
    if (metrics.empty())
        throw UsageError("fold_mean of an empty list");
    FoldSummary s{fold_index, metrics.size()};
    for (const auto& m : metrics) {
        s.dice += m.dice;
        s.iou += m.iou;
        s.fpr += m.fpr;
        s.fnr += m.fnr;
    }
    const double n = static_cast<double>(metrics.size());
    s.dice /= n;
    s.iou /= n;
    s.fpr /= n;
    s.fnr /= n;
    return s;
}

inline MeanSd mean_sd(const std::vector<double>& v)
{
    if (v.empty())
        throw UsageError("mean of an empty list");
    double m = 0.0;
    for (double x : v)
        m += x;
    m /= static_cast<double>(v.size());
    if (v.size() == 1)
        return {m, 0.0};
    double ss = 0.0;
    for (double x : v)
        ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

inline CrossFoldSummary cross_fold(const std::vector<FoldSummary>& folds)
{
    if (folds.empty())
        throw UsageError("cross_fold of an empty list");
    std::vector<double> d, i, p, n;
    for (const auto& f : folds) {
        d.push_back(f.dice);
        i.push_back(f.iou);
        p.push_back(f.fpr);
        n.push_back(f.fnr);
    }
    return {folds.size(), mean_sd(d), mean_sd(i), mean_sd(p), mean_sd(n)};
}

/// One row of the size-stratified table. Means are over images in the bin
/// and are absent when the bin is empty.
struct SizeBinRow {
    std::string label;
    std::size_t n = 0;
    std::optional<double> dice, iou, fpr, fnr;
};

inline std::vector<SizeBinRow> size_bin_table(const std::vector<ImageMetrics>& metrics)
{
    std::vector<SizeBinRow> rows;
    for (std::size_t b = 0; b < kSizeBinLabels.size(); ++b) {
        std::vector<ImageMetrics> in;
        for (const auto& m : metrics)
            if (static_cast<std::size_t>(size_bin(m.tumor_length_px)) == b)
                in.push_back(m);
        SizeBinRow row{kSizeBinLabels[b], in.size(), {}, {}, {}, {}};
        if (!in.empty()) {
            const auto s = fold_mean(in);
            row.dice = s.dice;
            row.iou = s.iou;
            row.fpr = s.fpr;
            row.fnr = s.fnr;
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace xbus::eval
