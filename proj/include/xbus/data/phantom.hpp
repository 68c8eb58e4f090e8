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

// Synthetic ultrasound-like phantoms with exact lesion masks.
//
// The lesion is an ellipse whose radius is perturbed by
// 1 + A sin(k phi + phase). Metadata is derived from the generator
// parameters so that prompts cover the whole attribute vocabulary:
//
//   shape   irregular if A > 0.08, else round if minor/major >= 0.85, else oval
//   margin  circumscribed if A <= 0.02, else by k: <=4 indistinct,
//           5-6 angular, 7-9 microlobulated, >=10 spiculated
//   BI-RADS round+circumscribed 2, oval+circumscribed 3, spiculated 5,
//           every other combination 4
//
// This lookup is a fixed surrogate, not a clinical rule.

#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "xbus/core/rng.hpp"
#include "xbus/data/sample.hpp"
#include "xbus/model/postprocess.hpp"

namespace xbus::data {

struct SyntheticConfig {
    std::size_t count = 200;
    std::uint64_t seed = 42;
    std::size_t image_size = 64;
    double min_axis = 6.0;         // semi-axis range in pixels
    double max_axis = 16.0;
    double max_amplitude = 0.25;   // boundary perturbation
    double min_contrast = 0.35;    // lesion darkening, fraction of background
    double max_contrast = 0.65;
    double speckle = 0.25;         // std of the unit-mean multiplicative noise
};

inline constexpr double kIrregularAmplitude = 0.08;
inline constexpr double kSmoothAmplitude = 0.02;
inline constexpr double kRoundAxisRatio = 0.85;

/// Generator parameters of one lesion.
struct LesionGeometry {
    double cx = 0, cy = 0;     // centre, pixel coordinates
    double a = 0, b = 0;       // semi-axes
    double theta = 0;          // rotation
    double amplitude = 0;
    int frequency = 0;
    double phase = 0;
};

inline prompt::LesionShape shape_for(const LesionGeometry& g)
{
    if (g.amplitude > kIrregularAmplitude)
        return prompt::LesionShape::irregular;
    const double ratio = std::min(g.a, g.b) / std::max(g.a, g.b);
    return ratio >= kRoundAxisRatio ? prompt::LesionShape::round : prompt::LesionShape::oval;
}

inline prompt::Margin margin_for(const LesionGeometry& g)
{
    using prompt::Margin;
    if (g.amplitude <= kSmoothAmplitude)
        return Margin::circumscribed;
    if (g.frequency <= 4)
        return Margin::indistinct;
    if (g.frequency <= 6)
        return Margin::angular;
    if (g.frequency <= 9)
        return Margin::microlobulated;
    return Margin::spiculated;
}

inline prompt::Birads birads_for(prompt::LesionShape s, prompt::Margin m)
{
    using namespace prompt;
    if (m == Margin::circumscribed && s != LesionShape::irregular)
        return s == LesionShape::round ? Birads::b2 : Birads::b3;
    if (m == Margin::spiculated)
        return Birads::b5;
    return Birads::b4;
}

/// Pixels whose centre lies inside the perturbed ellipse. Narrow lobes can
/// leave pixels detached from the body; render_phantom keeps the largest
/// component only.
inline Mask rasterize_lesion(const LesionGeometry& g, std::size_t h, std::size_t w)
{
    Mask m(h, w);
    const double c = std::cos(g.theta), s = std::sin(g.theta);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double dx = static_cast<double>(x) - g.cx, dy = static_cast<double>(y) - g.cy;
            const double u = (c * dx + s * dy) / g.a;
            const double v = (-s * dx + c * dy) / g.b;
            const double rho = std::hypot(u, v);
            const double phi = std::atan2(v, u);
            const double limit = 1.0 + g.amplitude * std::sin(g.frequency * phi + g.phase);
            m.at(y, x) = rho <= limit ? 1 : 0;
        }
    return m;
}

inline std::string phantom_id(std::size_t index)
{
    std::string digits = std::to_string(index);
    if (digits.size() < 4)
        digits.insert(0, 4 - digits.size(), '0');
    return "phantom_" + digits;
}

inline void validate(const SyntheticConfig& cfg)
{
    if (cfg.image_size == 0 || !(cfg.min_axis > 0.0) || cfg.max_axis < cfg.min_axis)
        throw ConfigError("synthetic axes must satisfy 0 < min_axis <= max_axis");
    if (cfg.max_amplitude < 0.0 || cfg.max_amplitude >= 1.0)
        throw ConfigError("synthetic max_amplitude must lie in [0, 1)");
    if (cfg.min_contrast < 0.0 || cfg.max_contrast > 1.0 || cfg.max_contrast < cfg.min_contrast)
        throw ConfigError("synthetic contrast range must lie within [0, 1]");
    if (cfg.speckle < 0.0)
        throw ConfigError("synthetic speckle must be non-negative");
    const double extent = 2.0 * cfg.max_axis * (1.0 + cfg.max_amplitude) + 2.0;
    if (extent > static_cast<double>(cfg.image_size))
        throw ConfigError("lesion extent " + std::to_string(extent) + " px exceeds image size "
                          + std::to_string(cfg.image_size));
}

/// Draws the lesion geometry for `index`.
inline LesionGeometry draw_geometry(const SyntheticConfig& cfg, std::size_t index)
{
    Rng rng(mix_seed(cfg.seed, index));
    LesionGeometry g;
    g.a = rng.uniform(cfg.min_axis, cfg.max_axis);
    g.b = rng.uniform(std::max(cfg.min_axis, 0.6 * g.a), g.a);
    g.theta = rng.uniform(0.0, std::numbers::pi);
    // Half of the lesions are smooth.
    g.amplitude = rng.uniform() < 0.5 ? rng.uniform(0.0, kSmoothAmplitude)
                                      : rng.uniform(kSmoothAmplitude, cfg.max_amplitude);
    g.frequency = static_cast<int>(rng.uniform_int(3, 12));
    g.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double reach = std::max(g.a, g.b) * (1.0 + g.amplitude) + 1.0;
    const double side = static_cast<double>(cfg.image_size);
    g.cx = rng.uniform(reach, side - 1.0 - reach);
    g.cy = rng.uniform(reach, side - 1.0 - reach);
    return g;
}

/// Renders a phantom from explicit geometry. `noise_seed` drives the
/// background and speckle.
inline Sample render_phantom(const LesionGeometry& g, std::size_t side, double contrast,
                             double speckle, std::uint64_t noise_seed, const std::string& id)
{
    Rng rng(noise_seed);
    Sample s;
    s.mask = model::largest_connected_component(rasterize_lesion(g, side, side));
    const double base = rng.uniform(0.5, 0.7);
    const double tilt = rng.uniform(-0.15, 0.15);
    std::vector<double> gray(side * side);
    for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
            const double depth = static_cast<double>(y) / static_cast<double>(side);
            double v = base + tilt * (depth - 0.5);
            if (s.mask.at(y, x))
                v *= 1.0 - contrast;
            const double noise = std::max(0.0, 1.0 + speckle * rng.normal());
            gray[y * side + x] = std::clamp(v * noise, 0.0, 1.0);
        }
    std::vector<double> rgb(3 * side * side);
    for (std::size_t c = 0; c < 3; ++c)
        std::copy(gray.begin(), gray.end(), rgb.begin() + static_cast<std::ptrdiff_t>(c * side * side));
    s.image = Tensor(Shape{3, side, side}, std::move(rgb));

    auto& m = s.metadata;
    m.image_id = id;
    m.image_path = "images/" + id + ".png";
    m.mask_path = "masks/" + id + ".png";
    m.size_value = static_cast<double>(bounding_box_side(s.mask));
    m.shape = shape_for(g);
    m.margin = margin_for(g);
    m.birads = birads_for(m.shape, m.margin);
    return s;
}

inline Sample generate_phantom(const SyntheticConfig& cfg, std::size_t index)
{
    validate(cfg);
    const auto g = draw_geometry(cfg, index);
    Rng rng(mix_seed(cfg.seed ^ 0x5eedULL, index));
    const double contrast = rng.uniform(cfg.min_contrast, cfg.max_contrast);
    return render_phantom(g, cfg.image_size, contrast, cfg.speckle, mix_seed(cfg.seed, index + 0x9e37ULL),
                          phantom_id(index));
}

inline std::vector<Sample> generate_phantoms(const SyntheticConfig& cfg)
{
    std::vector<Sample> out;
    out.reserve(cfg.count);
    for (std::size_t i = 0; i < cfg.count; ++i)
        out.push_back(generate_phantom(cfg, i));
    return out;
}

} // namespace xbus::data
