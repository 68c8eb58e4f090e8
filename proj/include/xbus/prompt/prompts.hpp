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

// Size bins, mask centroid, quadrant mapping and the two prompt templates.

#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "xbus/core/image.hpp"
#include "xbus/prompt/metadata.hpp"

namespace xbus::prompt {

enum class SizeCategory { small, medium, large };

inline std::string_view name_of(SizeCategory s)
{
    static constexpr std::array<std::string_view, 3> names{"small", "medium", "large"};
    return names[static_cast<std::size_t>(s)];
}

/// Tertile boundaries of the training-split size distribution.
struct SizeBins {
    double t1 = 0.0;
    double t2 = 0.0;
};

/// 1/3 and 2/3 quantiles by linear interpolation between order statistics.
inline SizeBins fit_size_bins(std::vector<double> training_sizes)
{
    if (training_sizes.size() < 3)
        throw ConfigError("size bins need at least 3 training values, got "
                          + std::to_string(training_sizes.size()));
    std::sort(training_sizes.begin(), training_sizes.end());
    auto q = [&](double p) {
        const double pos = p * static_cast<double>(training_sizes.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, training_sizes.size() - 1);
        return training_sizes[lo] + (pos - static_cast<double>(lo)) * (training_sizes[hi] - training_sizes[lo]);
    };
    return {q(1.0 / 3.0), q(2.0 / 3.0)};
}

/// Bins from the training rows of one fold. Only `train_rows` are read.
inline SizeBins fit_size_bins(const std::vector<LesionMetadata>& records,
                              const std::vector<std::size_t>& train_rows)
{
    std::vector<double> sizes;
    sizes.reserve(train_rows.size());
    for (auto i : train_rows)
        sizes.push_back(records.at(i).size_value);
    return fit_size_bins(std::move(sizes));
}

/// small if size <= t1, medium if <= t2, otherwise large.
inline SizeCategory discretize_size(double size_value, const SizeBins& bins)
{
    if (size_value <= bins.t1)
        return SizeCategory::small;
    if (size_value <= bins.t2)
        return SizeCategory::medium;
    return SizeCategory::large;
}

/// Pixel coordinates: cx along columns, cy along rows.
struct Centroid {
    double cx = 0.0;
    double cy = 0.0;
};

class EmptyMaskError : public Error {
public:
    EmptyMaskError() : Error("centroid of an empty mask is undefined") { }
};

/// First-order image moments: (M10 / M00, M01 / M00).
inline Centroid centroid_from_mask(const Mask& mask)
{
    double m00 = 0.0, m10 = 0.0, m01 = 0.0;
    for (std::size_t y = 0; y < mask.height; ++y)
        for (std::size_t x = 0; x < mask.width; ++x)
            if (mask.at(y, x)) {
                m00 += 1.0;
                m10 += static_cast<double>(x);
                m01 += static_cast<double>(y);
            }
    if (m00 == 0.0)
        throw EmptyMaskError();
    return {m10 / m00, m01 / m00};
}

enum class Quadrant { upper_inner, upper_outer, lower_inner, lower_outer };

inline std::string_view name_of(Quadrant q)
{
    static constexpr std::array<std::string_view, 4> names{"upper inner", "upper outer",
                                                           "lower inner", "lower outer"};
    return names[static_cast<std::size_t>(q)];
}

/// Upper iff cy < H/2. Laterality is not recorded in the metadata, so the
/// image-left half is taken as "inner".
inline Quadrant quadrant_of(const Centroid& c, std::size_t height, std::size_t width)
{
    const bool upper = c.cy < static_cast<double>(height) / 2.0;
    const bool inner = c.cx < static_cast<double>(width) / 2.0;
    if (upper)
        return inner ? Quadrant::upper_inner : Quadrant::upper_outer;
    return inner ? Quadrant::lower_inner : Quadrant::lower_outer;
}

/// Global context prompt. Without a quadrant the location is "unknown".
inline std::string verbalize_global(SizeCategory size, std::optional<Quadrant> quadrant)
{
    std::string s = "a ";
    s += name_of(size);
    if (quadrant) {
        s += " lesion in the ";
        s += name_of(*quadrant);
        s += " quadrant of the breast";
    } else {
        s += " lesion at an unknown location in the breast";
    }
    return s;
}

/// Local attribute prompt, e.g. "irregular shape, microlobulated margin, BI-RADS 4".
inline std::string verbalize_local(LesionShape shape, Margin margin, Birads birads)
{
    std::string s(name_of(shape));
    s += " shape, ";
    s += name_of(margin);
    s += " margin, BI-RADS ";
    s += name_of(birads);
    return s;
}

inline std::string verbalize_local(const LesionMetadata& m)
{
    return verbalize_local(m.shape, m.margin, m.birads);
}

inline std::string verbalize_local(const InferenceMetadata& m)
{
    return verbalize_local(m.shape, m.margin, m.birads);
}

} // namespace xbus::prompt
