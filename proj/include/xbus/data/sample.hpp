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
#include <cmath>

#include "xbus/core/conv.hpp"
#include "xbus/core/image.hpp"
#include "xbus/prompt/metadata.hpp"

namespace xbus::data {

/// One image, its lesion mask and metadata. image is [3,H,W] in [0,1].
struct Sample {
    Tensor image;
    Mask mask;
    prompt::LesionMetadata metadata;

    std::size_t height() const { return image.dim(1); }
    std::size_t width() const { return image.dim(2); }
};

inline Tensor to_tensor(const RgbImage& img)
{
    const std::size_t H = img.height, W = img.width;
    std::vector<double> v(3 * H * W);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                v[(c * H + y) * W + x] = img.pixel(y, x)[c] / 255.0;
    return Tensor(Shape{3, H, W}, std::move(v));
}

inline RgbImage to_rgb(const Tensor& image)
{
    if (image.rank() != 3 || image.dim(0) != 3)
        throw ShapeError("expected [3,H,W] image, got " + to_string(image.shape()));
    const std::size_t H = image.dim(1), W = image.dim(2);
    RgbImage out(H, W);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = std::clamp(image.data()[(c * H + y) * W + x], 0.0, 1.0);
                out.pixel(y, x)[c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
    return out;
}

/// Mask as a {0,1} tensor [1,H,W].
inline Tensor mask_tensor(const Mask& m)
{
    std::vector<double> v(m.pixels.begin(), m.pixels.end());
    return Tensor(Shape{1, m.height, m.width}, std::move(v));
}

/// Nearest-neighbour resize with half-pixel centres.
inline Mask resize_mask(const Mask& m, std::size_t out_h, std::size_t out_w)
{
    Mask out(out_h, out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        const auto sy = std::min(m.height - 1, (2 * y + 1) * m.height / (2 * out_h));
        for (std::size_t x = 0; x < out_w; ++x) {
            const auto sx = std::min(m.width - 1, (2 * x + 1) * m.width / (2 * out_w));
            out.at(y, x) = m.at(sy, sx) ? 1 : 0;
        }
    }
    return out;
}

inline Tensor resize_image(const Tensor& image, std::size_t out_h, std::size_t out_w)
{
    NoGradGuard no_grad;
    return bilinear_upsample(image, out_h, out_w).detach();
}

/// Square resize: image bilinear, mask nearest neighbour.
inline Sample resize_sample(const Sample& s, std::size_t side)
{
    if (side == 0)
        throw UsageError("resize side must be positive");
    if (s.height() == side && s.width() == side)
        return s;
    return {resize_image(s.image, side, side), resize_mask(s.mask, side, side), s.metadata};
}

/// Stacks images [3,H,W] into a batch [B,3,H,W].
inline Tensor stack_images(const std::vector<const Tensor*>& images)
{
    if (images.empty())
        throw ShapeError("cannot stack an empty batch");
    const Shape one = images[0]->shape();
    std::vector<double> v;
    v.reserve(images.size() * images[0]->size());
    for (const auto* t : images) {
        if (t->shape() != one)
            throw ShapeError("batch images differ in shape");
        v.insert(v.end(), t->data().begin(), t->data().end());
    }
    return Tensor(Shape{images.size(), one[0], one[1], one[2]}, std::move(v));
}

} // namespace xbus::data
