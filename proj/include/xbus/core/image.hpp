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
#include <cstdint>
#include <string>
#include <vector>

#include "xbus/core/errors.hpp"

namespace xbus {

/// Binary image, one byte per pixel holding 0 or 1, row-major.
struct Mask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;

    Mask() = default;
    Mask(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), pixels(h * w, fill) { }

    std::uint8_t& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
    std::uint8_t at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

    std::size_t count() const
    {
        std::size_t n = 0;
        for (auto p : pixels)
            n += p != 0;
        return n;
    }

    bool empty() const { return count() == 0; }

    friend bool operator==(const Mask&, const Mask&) = default;
};

/// 8-bit interleaved RGB image.
struct RgbImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> rgb;

    RgbImage() = default;
    RgbImage(std::size_t h, std::size_t w) : height(h), width(w), rgb(h * w * 3, 0) { }

    std::uint8_t* pixel(std::size_t y, std::size_t x) { return &rgb[(y * width + x) * 3]; }
    const std::uint8_t* pixel(std::size_t y, std::size_t x) const { return &rgb[(y * width + x) * 3]; }
};

inline void require_same_size(const Mask& a, const Mask& b, const char* what)
{
    if (a.height != b.height || a.width != b.width)
        throw ShapeError(std::string(what) + ": mask sizes differ ("
                         + std::to_string(a.height) + "x" + std::to_string(a.width) + " vs "
                         + std::to_string(b.height) + "x" + std::to_string(b.width) + ")");
}

/// max(bounding-box height, width) of the foreground; 0 for an empty mask.
inline std::size_t bounding_box_side(const Mask& m)
{
    std::size_t y0 = m.height, y1 = 0, x0 = m.width, x1 = 0;
    bool any = false;
    for (std::size_t y = 0; y < m.height; ++y)
        for (std::size_t x = 0; x < m.width; ++x)
            if (m.at(y, x)) {
                any = true;
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
            }
    if (!any)
        return 0;
    return std::max(y1 - y0 + 1, x1 - x0 + 1);
}

} // namespace xbus
