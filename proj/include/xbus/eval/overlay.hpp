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

#include <array>
#include <cmath>

#include "xbus/core/image.hpp"
#include "xbus/eval/metrics.hpp"

namespace xbus::eval {

struct OverlayStyle {
    double alpha = 0.5;
    std::array<std::uint8_t, 3> fp{0, 0, 255};
    std::array<std::uint8_t, 3> fn{255, 0, 0};
    std::array<std::uint8_t, 3> tp_outline{0, 255, 0};
};

/// Grayscale background with FP pixels tinted blue, FN pixels tinted red and
/// the boundary of the TP region drawn opaque green.
inline RgbImage render_overlay(const Mask& pred, const Mask& truth, const RgbImage& image,
                               const OverlayStyle& style = {})
{
    require_same_size(pred, truth, "render_overlay");
    if (image.height != truth.height || image.width != truth.width)
        throw ShapeError("render_overlay: image and masks differ in size");
    const std::size_t H = truth.height, W = truth.width;
    auto tp = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
        if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(H) || x >= static_cast<std::ptrdiff_t>(W))
            return false;
        const auto yy = static_cast<std::size_t>(y), xx = static_cast<std::size_t>(x);
        return pred.at(yy, xx) && truth.at(yy, xx);
    };
    RgbImage out(H, W);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            const auto* src = image.pixel(y, x);
            const double gray = 0.299 * src[0] + 0.587 * src[1] + 0.114 * src[2];
            auto* dst = out.pixel(y, x);
            const bool p = pred.at(y, x) != 0, t = truth.at(y, x) != 0;
            const auto sy = static_cast<std::ptrdiff_t>(y), sx = static_cast<std::ptrdiff_t>(x);
            const std::array<std::uint8_t, 3>* tint = nullptr;
            double a = style.alpha;
            if (p && t) {
                if (!tp(sy - 1, sx) || !tp(sy + 1, sx) || !tp(sy, sx - 1) || !tp(sy, sx + 1)) {
                    tint = &style.tp_outline;
                    a = 1.0;
                }
            } else if (p) {
                tint = &style.fp;
            } else if (t) {
                tint = &style.fn;
            }
            for (int c = 0; c < 3; ++c) {
                const double v = tint ? (1.0 - a) * gray + a * (*tint)[static_cast<std::size_t>(c)] : gray;
                dst[c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    return out;
}

} // namespace xbus::eval
