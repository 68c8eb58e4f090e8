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

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "xbus/core/image.hpp"

namespace xbus::eval {

inline constexpr double kEps = 1e-8;

struct PixelCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
};

inline PixelCounts pixel_counts(const Mask& pred, const Mask& truth)
{
    require_same_size(pred, truth, "pixel_counts");
    PixelCounts c;
    for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
        const bool p = pred.pixels[i] != 0, t = truth.pixels[i] != 0;
        if (p && t)
            ++c.tp;
        else if (p)
            ++c.fp;
        else if (t)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

namespace detail {

inline bool both_empty(const PixelCounts& c) { return c.tp + c.fp + c.fn == 0; }
inline double d(std::size_t v) { return static_cast<double>(v); }

} // namespace detail

/// 2TP / (2TP + FP + FN + eps); 1 when prediction and truth are both empty.
inline double dice(const PixelCounts& c)
{
    if (detail::both_empty(c))
        return 1.0;
    return 2.0 * detail::d(c.tp) / (2.0 * detail::d(c.tp) + detail::d(c.fp) + detail::d(c.fn) + kEps);
}

/// TP / (TP + FP + FN + eps); 1 when both empty.
inline double iou(const PixelCounts& c)
{
    if (detail::both_empty(c))
        return 1.0;
    return detail::d(c.tp) / (detail::d(c.tp) + detail::d(c.fp) + detail::d(c.fn) + kEps);
}

/// FP / (FP + TN + eps).
inline double fpr(const PixelCounts& c)
{
    return detail::d(c.fp) / (detail::d(c.fp) + detail::d(c.tn) + kEps);
}

/// FN / (FN + TP + eps); 0 when both empty.
inline double fnr(const PixelCounts& c)
{
    if (detail::both_empty(c))
        return 0.0;
    return detail::d(c.fn) / (detail::d(c.fn) + detail::d(c.tp) + kEps);
}

enum class SizeBin { up_to_110, from_111_to_250, above_250 };

inline constexpr std::array<const char*, 3> kSizeBinLabels{"0-110", "111-250", "250+"};

inline SizeBin size_bin(std::size_t tumor_length_px)
{
    if (tumor_length_px <= 110)
        return SizeBin::up_to_110;
    if (tumor_length_px <= 250)
        return SizeBin::from_111_to_250;
    return SizeBin::above_250;
}

inline constexpr std::size_t kReferenceSide = 352;

/// Longest bounding-box side of the truth mask after scaling the image to
/// 352 x 352, rounded to whole pixels.
inline std::size_t tumor_length_px(const Mask& truth)
{
    std::size_t y0 = truth.height, y1 = 0, x0 = truth.width, x1 = 0;
    for (std::size_t y = 0; y < truth.height; ++y)
        for (std::size_t x = 0; x < truth.width; ++x)
            if (truth.at(y, x)) {
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
            }
    if (y0 > y1)
        return 0;
    const double sy = static_cast<double>(kReferenceSide) / static_cast<double>(truth.height);
    const double sx = static_cast<double>(kReferenceSide) / static_cast<double>(truth.width);
    const double h = static_cast<double>(y1 - y0 + 1) * sy, w = static_cast<double>(x1 - x0 + 1) * sx;
    return static_cast<std::size_t>(std::lround(std::max(h, w)));
}

struct ImageMetrics {
    std::string image_id;
    std::size_t fold = 0;
    double dice = 0, iou = 0, fpr = 0, fnr = 0;
    std::size_t tumor_length_px = 0;
};

inline ImageMetrics image_metrics(const std::string& id, std::size_t fold, const Mask& pred, const Mask& truth)
{
    const auto c = pixel_counts(pred, truth);
    return {id, fold, dice(c), iou(c), fpr(c), fnr(c), tumor_length_px(truth)};
}

} // namespace xbus::eval
