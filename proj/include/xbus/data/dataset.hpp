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

// On-disk dataset layout shared by real and synthetic data:
//   root/images/<id>.png, root/masks/<id>.png, root/metadata.csv

#pragma once

#include <filesystem>
#include <fstream>

#include "xbus/data/png_io.hpp"
#include "xbus/data/sample.hpp"
#include "xbus/model/postprocess.hpp"

namespace xbus::data {

struct LoadResult {
    std::vector<Sample> samples;
    std::vector<std::string> warnings;
    std::vector<std::string> errors; // one per invalid item
};

/// Number of 4-connected foreground components.
inline std::size_t component_count(const Mask& m)
{
    std::size_t n = 0;
    Mask rest = m;
    while (!rest.empty()) {
        const Mask largest = model::largest_connected_component(rest);
        for (std::size_t i = 0; i < rest.pixels.size(); ++i)
            if (largest.pixels[i])
                rest.pixels[i] = 0;
        ++n;
    }
    return n;
}

/// Loads every metadata row with its image and mask. Paths in the CSV are
/// relative to `root` unless absolute. Images whose metadata lists several
/// lesions, or whose mask has more than one component, are excluded with a
/// warning. Unreadable or mismatched items are reported in `errors`.
inline LoadResult load_blu(const std::string& root, const std::string& csv)
{
    namespace fs = std::filesystem;
    LoadResult out;
    const auto table = prompt::parse_metadata_csv(csv);
    out.warnings = table.warnings;
    auto resolve = [&](const std::string& p) {
        const fs::path path(p);
        return (path.is_absolute() ? path : fs::path(root) / path).string();
    };
    for (const auto& rec : table.records) {
        const auto image_path = resolve(rec.image_path);
        const auto mask_path = resolve(rec.mask_path);
        if (!fs::exists(image_path)) {
            out.errors.push_back(rec.image_id + ": missing image file " + image_path);
            continue;
        }
        if (!fs::exists(mask_path)) {
            out.errors.push_back(rec.image_id + ": missing mask file " + mask_path);
            continue;
        }
        Sample s;
        try {
            s.image = to_tensor(read_rgb(image_path));
            s.mask = read_mask(mask_path);
        } catch (const Error& e) {
            out.errors.push_back(rec.image_id + ": " + e.what());
            continue;
        }
        if (s.mask.height != s.height() || s.mask.width != s.width()) {
            out.errors.push_back(rec.image_id + ": mask " + mask_path + " is "
                                 + std::to_string(s.mask.height) + "x" + std::to_string(s.mask.width)
                                 + " but image is " + std::to_string(s.height()) + "x"
                                 + std::to_string(s.width()));
            continue;
        }
        if (s.mask.empty()) {
            out.errors.push_back(rec.image_id + ": mask " + mask_path + " has no foreground");
            continue;
        }
        if (const auto n = component_count(s.mask); n > 1) {
            out.warnings.push_back("image '" + rec.image_id + "' mask has " + std::to_string(n)
                                   + " lesions; excluded (multi-lesion)");
            continue;
        }
        s.metadata = rec;
        out.samples.push_back(std::move(s));
    }
    return out;
}

inline LoadResult load_dataset(const std::string& root)
{
    return load_blu(root, (std::filesystem::path(root) / "metadata.csv").string());
}

/// Writes samples in the standard layout, using each sample's metadata
/// paths relative to `root`.
inline void write_dataset(const std::string& root, const std::vector<Sample>& samples)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(root) / "images", ec);
    fs::create_directories(fs::path(root) / "masks", ec);
    if (ec)
        throw UsageError("cannot create dataset directories under " + root + ": " + ec.message());
    std::ofstream csv(fs::path(root) / "metadata.csv", std::ios::binary);
    if (!csv)
        throw UsageError("cannot write " + (fs::path(root) / "metadata.csv").string());
    csv << prompt::metadata_csv_header();
    for (const auto& s : samples) {
        write_rgb((fs::path(root) / s.metadata.image_path).string(), to_rgb(s.image));
        write_mask((fs::path(root) / s.metadata.mask_path).string(), s.mask);
        csv << prompt::metadata_csv_row(s.metadata);
    }
    if (!csv)
        throw UsageError("error while writing metadata.csv under " + root);
}

} // namespace xbus::data
