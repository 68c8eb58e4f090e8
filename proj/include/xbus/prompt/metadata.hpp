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
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "xbus/core/errors.hpp"

namespace xbus::prompt {

enum class LesionShape { oval, round, irregular };
enum class Margin { circumscribed, indistinct, angular, microlobulated, spiculated };
enum class Birads { b2, b3, b4, b4a, b4b, b4c, b5 };

inline constexpr std::array<std::string_view, 3> kShapeNames{"oval", "round", "irregular"};
inline constexpr std::array<std::string_view, 5> kMarginNames{
    "circumscribed", "indistinct", "angular", "microlobulated", "spiculated"};
inline constexpr std::array<std::string_view, 7> kBiradsNames{"2", "3", "4", "4a", "4b", "4c", "5"};

inline std::string_view name_of(LesionShape s) { return kShapeNames[static_cast<std::size_t>(s)]; }
inline std::string_view name_of(Margin m) { return kMarginNames[static_cast<std::size_t>(m)]; }
inline std::string_view name_of(Birads b) { return kBiradsNames[static_cast<std::size_t>(b)]; }

namespace detail {

inline std::string normalize_token(std::string_view s)
{
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
        ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
        --b;
    std::string out(s.substr(a, b - a));
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view text)
{
    const auto key = normalize_token(text);
    for (std::size_t i = 0; i < N; ++i)
        if (names[i] == key)
            return static_cast<Enum>(i);
    return std::nullopt;
}

} // namespace detail

inline std::optional<LesionShape> parse_shape(std::string_view s)
{
    return detail::lookup<LesionShape>(kShapeNames, s);
}

inline std::optional<Margin> parse_margin(std::string_view s)
{
    return detail::lookup<Margin>(kMarginNames, s);
}

inline std::optional<Birads> parse_birads(std::string_view s)
{
    return detail::lookup<Birads>(kBiradsNames, s);
}

/// One row of the metadata table.
struct LesionMetadata {
    std::string image_id;
    std::string image_path;
    std::string mask_path; // empty at inference
    double size_value = 0.0;
    LesionShape shape = LesionShape::oval;
    Margin margin = Margin::circumscribed;
    Birads birads = Birads::b2;

    friend bool operator==(const LesionMetadata&, const LesionMetadata&) = default;
};

/// The subset of metadata available to mask-free inference. It has no mask
/// field, so a predictor taking it cannot reach ground truth.
struct InferenceMetadata {
    std::string image_id;
    double size_value = 0.0;
    LesionShape shape = LesionShape::oval;
    Margin margin = Margin::circumscribed;
    Birads birads = Birads::b2;

    static InferenceMetadata from(const LesionMetadata& m)
    {
        return {m.image_id, m.size_value, m.shape, m.margin, m.birads};
    }
};

struct MetadataTable {
    std::vector<LesionMetadata> records;
    std::vector<std::string> warnings;
};

inline constexpr std::array<std::string_view, 7> kMetadataColumns{
    "image_id", "image_path", "mask_path", "size", "shape", "margin", "birads"};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace detail

/// Parses metadata CSV text. Rows are numbered from 1 for the header. Images
/// listed on more than one row carry several lesions and are dropped with a
/// warning.
inline MetadataTable parse_metadata_csv_text(const std::string& text)
{
    MetadataTable table;
    std::istringstream in(text);
    std::string line;
    std::size_t row = 0;
    std::map<std::string, std::size_t> col;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++row;
        if (detail::normalize_token(line).empty())
            continue;
        const auto fields = detail::split_csv_line(line);
        if (!have_header) {
            for (std::size_t i = 0; i < fields.size(); ++i)
                col[detail::normalize_token(fields[i])] = i;
            for (auto name : kMetadataColumns)
                if (!col.count(std::string(name)))
                    throw ParseError(row, std::string(name), "missing column in header");
            have_header = true;
            continue;
        }
        auto field = [&](std::string_view name) -> std::string {
            const auto idx = col.at(std::string(name));
            if (idx >= fields.size())
                throw ParseError(row, std::string(name), "missing value");
            return fields[idx];
        };
        LesionMetadata m;
        // id kept verbatim apart from surrounding spaces
        {
            auto id = field("image_id");
            const auto a = id.find_first_not_of(" \t");
            const auto b = id.find_last_not_of(" \t");
            m.image_id = a == std::string::npos ? "" : id.substr(a, b - a + 1);
        }
        if (m.image_id.empty())
            throw ParseError(row, "image_id", "empty image id");
        m.image_path = field("image_path");
        m.mask_path = field("mask_path");
        {
            const auto raw = detail::normalize_token(field("size"));
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
            if (ec != std::errc() || ptr != raw.data() + raw.size() || !std::isfinite(v))
                throw ParseError(row, "size", "not a number: '" + raw + "'");
            if (v <= 0.0)
                throw ParseError(row, "size", "size must be positive");
            m.size_value = v;
        }
        const auto shape = parse_shape(field("shape"));
        if (!shape)
            throw ParseError(row, "shape", "unknown shape '" + field("shape") + "'");
        m.shape = *shape;
        const auto margin = parse_margin(field("margin"));
        if (!margin)
            throw ParseError(row, "margin", "unknown margin '" + field("margin") + "'");
        m.margin = *margin;
        const auto birads = parse_birads(field("birads"));
        if (!birads)
            throw ParseError(row, "birads", "unknown BI-RADS grade '" + field("birads") + "'");
        m.birads = *birads;
        table.records.push_back(std::move(m));
    }
    if (!have_header) {
        table.warnings.push_back("metadata file is empty");
        return table;
    }

    std::map<std::string, int> per_image;
    for (const auto& r : table.records)
        ++per_image[r.image_id];
    std::vector<LesionMetadata> kept;
    for (auto& r : table.records) {
        if (per_image[r.image_id] > 1)
            continue;
        kept.push_back(std::move(r));
    }
    for (const auto& [id, n] : per_image)
        if (n > 1)
            table.warnings.push_back("image '" + id + "' has " + std::to_string(n)
                                     + " lesions; excluded (multi-lesion)");
    table.records = std::move(kept);
    return table;
}

inline MetadataTable parse_metadata_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot open metadata file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_metadata_csv_text(ss.str());
}

inline std::string format_size(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string metadata_csv_header()
{
    return "image_id,image_path,mask_path,size,shape,margin,birads\n";
}

inline std::string metadata_csv_row(const LesionMetadata& m)
{
    return m.image_id + "," + m.image_path + "," + m.mask_path + "," + format_size(m.size_value)
           + "," + std::string(name_of(m.shape)) + "," + std::string(name_of(m.margin)) + ","
           + std::string(name_of(m.birads)) + "\n";
}

} // namespace xbus::prompt
