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

// Model and training configuration, the two named profiles, and a flat
// key=value text format used by config files, CLI overrides and checkpoint
// manifests.

#pragma once

#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "xbus/core/errors.hpp"
#include "xbus/prompt/text_encoder.hpp"

namespace xbus::model {

struct ViTConfig {
    std::size_t image_size = 64;
    std::size_t patch_size = 8;
    std::size_t depth = 6;
    std::size_t dim = 128;
    std::size_t heads = 4;
    std::vector<std::size_t> tap_layers{2, 4, 6}; // 1-based block indices
    std::size_t reduce_dim = 64;

    std::size_t grid() const { return image_size / patch_size; }
    std::size_t num_tokens() const { return grid() * grid() + 1; }
};

struct LfeConfig {
    std::array<std::size_t, 5> widths{16, 32, 64, 128, 256};
    std::size_t heads = 4;
};

struct SfaConfig {
    bool residual_global = false;
    bool residual_local = true;
    std::size_t hidden = 0; // 0: text embedding width
};

struct ModelConfig {
    std::string profile = "desk";
    std::uint64_t seed = 1234;
    ViTConfig vit;
    prompt::TextEncoderConfig text;
    LfeConfig lfe;
    SfaConfig sfa;
    std::size_t global_channels = 64;
    std::size_t local_channels = 32;

    std::size_t image_size() const { return vit.image_size; }
    /// Spatial size of F_g and F_l.
    std::size_t feature_grid() const { return 2 * vit.grid(); }
    std::size_t fused_channels() const { return global_channels + local_channels; }
};

struct TrainConfig {
    std::size_t iterations = 1000;
    std::size_t batch_size = 4;
    double base_lr = 1e-4;
    double weight_decay = 0.01;
    double bce_weight = 0.5;
    double dice_weight = 0.5;
    std::uint64_t seed = 7;
};

inline ModelConfig desk_profile() { return {}; }

inline ModelConfig full_profile()
{
    ModelConfig c;
    c.profile = "full";
    c.vit = {352, 16, 12, 768, 12, {4, 8, 12}, 64};
    c.lfe.widths = {64, 256, 512, 1024, 2048};
    c.lfe.heads = 8;
    return c;
}

inline ModelConfig profile_by_name(const std::string& name)
{
    if (name == "desk")
        return desk_profile();
    if (name == "full")
        return full_profile();
    throw ConfigError("unknown model.profile '" + name + "' (expected desk or full)");
}

/// Throws ConfigError describing the first violated constraint.
inline void validate(const ModelConfig& c)
{
    const auto& v = c.vit;
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (v.patch_size == 0 || v.image_size % v.patch_size != 0)
        fail("gfe.image_size must be divisible by gfe.patch_size");
    if (v.image_size % 32 != 0)
        fail("gfe.image_size must be divisible by 32 for the local encoder");
    if (v.tap_layers.empty())
        fail("gfe.tap_layers must not be empty");
    for (auto t : v.tap_layers)
        if (t < 1 || t > v.depth)
            fail("gfe.tap_layers entry " + std::to_string(t) + " outside [1, gfe.depth]");
    if (v.heads == 0 || v.dim % v.heads != 0)
        fail("gfe.dim must be divisible by gfe.heads");
    if (c.text.heads == 0 || c.text.dim % c.text.heads != 0)
        fail("text.dim must be divisible by text.heads");
    for (std::size_t i = 3; i < 5; ++i)
        if (c.lfe.heads == 0 || c.lfe.widths[i] % c.lfe.heads != 0)
            fail("lfe.widths[" + std::to_string(i) + "] must be divisible by lfe.heads");
    for (auto w : c.lfe.widths)
        if (w == 0)
            fail("lfe.widths must be positive");
    const std::size_t dec1 = v.image_size / 2, grid = c.feature_grid();
    if (dec1 % grid != 0 && grid % dec1 != 0)
        fail("local decoder output " + std::to_string(dec1) + " and global grid "
             + std::to_string(grid) + " are not integer multiples");
    if (c.global_channels != 64 || c.local_channels != 32)
        fail("branch widths are fixed at 64 (global) and 32 (local)");
}

inline void validate(const TrainConfig& t)
{
    if (t.iterations == 0)
        throw ConfigError("train.iterations must be at least 1");
    if (t.batch_size == 0)
        throw ConfigError("train.batch_size must be at least 1");
    if (!(t.base_lr > 0.0))
        throw ConfigError("train.base_lr must be positive");
    if (t.weight_decay < 0.0 || t.bce_weight < 0.0 || t.dice_weight < 0.0)
        throw ConfigError("train weights must be non-negative");
}

// ---------------------------------------------------------------------------
// key=value format

using ConfigMap = std::map<std::string, std::string>;

/// Lines "key = value"; '#' starts a comment; blank lines ignored.
inline ConfigMap parse_config_text(const std::string& text)
{
    ConfigMap out;
    std::istringstream in(text);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const auto key_end = line.find('=');
        const auto trimmed = prompt::detail::normalize_token(line);
        if (trimmed.empty())
            continue;
        if (key_end == std::string::npos)
            throw ConfigError("config line " + std::to_string(row) + ": expected key=value");
        auto key = prompt::detail::normalize_token(line.substr(0, key_end));
        std::string value = line.substr(key_end + 1);
        const auto a = value.find_first_not_of(" \t\r");
        const auto b = value.find_last_not_of(" \t\r");
        value = a == std::string::npos ? "" : value.substr(a, b - a + 1);
        out[key] = value;
    }
    return out;
}

inline ConfigMap read_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

namespace detail {

inline std::uint64_t to_uint(const std::string& key, const std::string& v)
{
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

inline double to_double(const std::string& key, const std::string& v)
{
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v)
{
    const auto t = prompt::detail::normalize_token(v);
    if (t == "true" || t == "1" || t == "on")
        return true;
    if (t == "false" || t == "0" || t == "off")
        return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::size_t> to_list(const std::string& key, const std::string& v)
{
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(to_uint(key, prompt::detail::normalize_token(item)));
    return out;
}

inline std::string join(const std::vector<std::size_t>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

inline std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace detail

/// Applies `map` on top of the profile named by model.profile (or the
/// current profile when absent). Unknown keys are rejected.
inline void apply_config(const ConfigMap& map, ModelConfig& m, TrainConfig& t)
{
    if (const auto it = map.find("model.profile"); it != map.end())
        m = profile_by_name(it->second);
    for (const auto& [key, v] : map) {
        using namespace detail;
        if (key == "model.profile")
            continue;
        else if (key == "model.seed")
            m.seed = to_uint(key, v);
        else if (key == "gfe.image_size")
            m.vit.image_size = to_uint(key, v);
        else if (key == "gfe.patch_size")
            m.vit.patch_size = to_uint(key, v);
        else if (key == "gfe.depth")
            m.vit.depth = to_uint(key, v);
        else if (key == "gfe.dim")
            m.vit.dim = to_uint(key, v);
        else if (key == "gfe.heads")
            m.vit.heads = to_uint(key, v);
        else if (key == "gfe.tap_layers")
            m.vit.tap_layers = to_list(key, v);
        else if (key == "gfe.reduce_dim")
            m.vit.reduce_dim = to_uint(key, v);
        else if (key == "text.dim")
            m.text.dim = to_uint(key, v);
        else if (key == "text.heads")
            m.text.heads = to_uint(key, v);
        else if (key == "text.layers")
            m.text.layers = to_uint(key, v);
        else if (key == "text.max_tokens")
            m.text.max_tokens = to_uint(key, v);
        else if (key == "lfe.widths") {
            const auto w = to_list(key, v);
            if (w.size() != 5)
                throw ConfigError("lfe.widths needs exactly 5 entries");
            std::copy(w.begin(), w.end(), m.lfe.widths.begin());
        } else if (key == "lfe.heads")
            m.lfe.heads = to_uint(key, v);
        else if (key == "sfa.residual.global")
            m.sfa.residual_global = to_bool(key, v);
        else if (key == "sfa.residual.local")
            m.sfa.residual_local = to_bool(key, v);
        else if (key == "sfa.hidden")
            m.sfa.hidden = to_uint(key, v);
        else if (key == "train.iterations")
            t.iterations = to_uint(key, v);
        else if (key == "train.batch_size")
            t.batch_size = to_uint(key, v);
        else if (key == "train.base_lr")
            t.base_lr = to_double(key, v);
        else if (key == "train.weight_decay")
            t.weight_decay = to_double(key, v);
        else if (key == "train.loss.bce_weight")
            t.bce_weight = to_double(key, v);
        else if (key == "train.loss.dice_weight")
            t.dice_weight = to_double(key, v);
        else if (key == "train.seed")
            t.seed = to_uint(key, v);
        else
            throw ConfigError("unknown config key '" + key + "'");
    }
}

/// Every model key, in a form apply_config reads back to the same config.
inline ConfigMap to_config_map(const ModelConfig& m)
{
    using namespace detail;
    return {
        {"model.profile", m.profile},
        {"model.seed", std::to_string(m.seed)},
        {"gfe.image_size", std::to_string(m.vit.image_size)},
        {"gfe.patch_size", std::to_string(m.vit.patch_size)},
        {"gfe.depth", std::to_string(m.vit.depth)},
        {"gfe.dim", std::to_string(m.vit.dim)},
        {"gfe.heads", std::to_string(m.vit.heads)},
        {"gfe.tap_layers", join(m.vit.tap_layers)},
        {"gfe.reduce_dim", std::to_string(m.vit.reduce_dim)},
        {"text.dim", std::to_string(m.text.dim)},
        {"text.heads", std::to_string(m.text.heads)},
        {"text.layers", std::to_string(m.text.layers)},
        {"text.max_tokens", std::to_string(m.text.max_tokens)},
        {"lfe.widths", join({m.lfe.widths.begin(), m.lfe.widths.end()})},
        {"lfe.heads", std::to_string(m.lfe.heads)},
        {"sfa.residual.global", m.sfa.residual_global ? "true" : "false"},
        {"sfa.residual.local", m.sfa.residual_local ? "true" : "false"},
        {"sfa.hidden", std::to_string(m.sfa.hidden)},
    };
}

inline ConfigMap to_config_map(const TrainConfig& t)
{
    using namespace detail;
    return {
        {"train.iterations", std::to_string(t.iterations)},
        {"train.batch_size", std::to_string(t.batch_size)},
        {"train.base_lr", fmt(t.base_lr)},
        {"train.weight_decay", fmt(t.weight_decay)},
        {"train.loss.bce_weight", fmt(t.bce_weight)},
        {"train.loss.dice_weight", fmt(t.dice_weight)},
        {"train.seed", std::to_string(t.seed)},
    };
}

} // namespace xbus::model
