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

// PNG reading and writing through the libpng simplified API.

#pragma once

#include <png.h>

#include <cstring>
#include <string>
#include <vector>

#include "xbus/core/image.hpp"

namespace xbus::data {

namespace detail {

struct PngReader {
    png_image img;

    explicit PngReader(const std::string& path)
    {
        std::memset(&img, 0, sizeof img);
        img.version = PNG_IMAGE_VERSION;
        if (!png_image_begin_read_from_file(&img, path.c_str()))
            throw FormatError("cannot read PNG " + path + ": " + img.message);
    }

    ~PngReader() { png_image_free(&img); }

    PngReader(const PngReader&) = delete;
    PngReader& operator=(const PngReader&) = delete;

    std::vector<std::uint8_t> finish(png_uint_32 format, const std::string& path)
    {
        img.format = format;
        std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
        if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
            throw FormatError("cannot decode PNG " + path + ": " + img.message);
        return buf;
    }
};

inline void write_png(const std::string& path, std::size_t h, std::size_t w, png_uint_32 format,
                      const std::uint8_t* data)
{
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = format;
    if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw UsageError("cannot write PNG " + path + ": " + msg);
    }
}

} // namespace detail

/// Any 8- or 16-bit PNG, converted to 8-bit RGB.
inline RgbImage read_rgb(const std::string& path)
{
    detail::PngReader r(path);
    RgbImage out(r.img.height, r.img.width);
    out.rgb = r.finish(PNG_FORMAT_RGB, path);
    return out;
}

inline void write_rgb(const std::string& path, const RgbImage& img)
{
    detail::write_png(path, img.height, img.width, PNG_FORMAT_RGB, img.rgb.data());
}

/// 8-bit single-channel gray image.
inline std::vector<std::uint8_t> read_gray8(const std::string& path, std::size_t& height, std::size_t& width)
{
    detail::PngReader r(path);
    if (r.img.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA))
        throw FormatError(path + ": expected a single-channel PNG");
    if (r.img.format & PNG_FORMAT_FLAG_LINEAR)
        throw FormatError(path + ": expected 8-bit samples, found 16-bit");
    height = r.img.height;
    width = r.img.width;
    return r.finish(PNG_FORMAT_GRAY, path);
}

inline void write_gray8(const std::string& path, std::size_t h, std::size_t w, const std::vector<std::uint8_t>& v)
{
    if (v.size() != h * w)
        throw ShapeError("gray buffer size does not match " + std::to_string(h) + "x" + std::to_string(w));
    detail::write_png(path, h, w, PNG_FORMAT_GRAY, v.data());
}

/// Foreground iff value >= 128.
inline Mask read_mask(const std::string& path)
{
    std::size_t h = 0, w = 0;
    const auto gray = read_gray8(path, h, w);
    Mask m(h, w);
    for (std::size_t i = 0; i < gray.size(); ++i)
        m.pixels[i] = gray[i] >= 128 ? 1 : 0;
    return m;
}

/// Written as {0, 255}.
inline void write_mask(const std::string& path, const Mask& m)
{
    std::vector<std::uint8_t> v(m.pixels.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = m.pixels[i] ? 255 : 0;
    write_gray8(path, m.height, m.width, v);
}

} // namespace xbus::data
