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

// Checkpoint container.
//
// Binary file:   "XBCK" | u32 version | u64 count | count x entry
//   entry:       u32 name_len | name | u32 rank | rank x u64 dim | f64 values
// All integers and doubles little-endian.
//
// Manifest (<path>.manifest.txt): comment lines "#key=value" carrying the
// model configuration, then one "name<TAB>shape<TAB>frozen" line per entry.

#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "xbus/core/optim.hpp"

namespace xbus {

struct CheckpointEntry {
    std::string name;
    Tensor tensor;
    bool frozen = false;
};

struct Checkpoint {
    std::vector<CheckpointEntry> entries;
    std::map<std::string, std::string> metadata;

    const CheckpointEntry* find(const std::string& name) const
    {
        for (const auto& e : entries)
            if (e.name == name)
                return &e;
        return nullptr;
    }
};

inline std::string manifest_path(const std::string& path) { return path + ".manifest.txt"; }

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::ostream& os, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_uint(std::istream& is, int bytes)
{
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        const int c = is.get();
        if (c == std::char_traits<char>::eof())
            throw FormatError("truncated checkpoint");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

} // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw UsageError("cannot write checkpoint " + path);
    os.write("XBCK", 4);
    detail::put_u32(os, 1);
    detail::put_u64(os, ckpt.entries.size());
    for (const auto& e : ckpt.entries) {
        detail::put_u32(os, static_cast<std::uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        detail::put_u32(os, static_cast<std::uint32_t>(e.tensor.rank()));
        for (auto d : e.tensor.shape())
            detail::put_u64(os, d);
        for (double v : e.tensor.data())
            detail::put_u64(os, std::bit_cast<std::uint64_t>(v));
    }
    if (!os)
        throw UsageError("failed writing checkpoint " + path);

    std::ofstream ms(manifest_path(path));
    if (!ms)
        throw UsageError("cannot write manifest for " + path);
    ms << "# xbusnet checkpoint v1\n";
    for (const auto& [k, v] : ckpt.metadata)
        ms << '#' << k << '=' << v << '\n';
    for (const auto& e : ckpt.entries)
        ms << e.name << '\t' << to_string(e.tensor.shape()) << '\t' << (e.frozen ? "frozen" : "trainable")
           << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw UsageError("cannot open checkpoint " + path);
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "XBCK")
        throw FormatError("not a checkpoint file: " + path);
    if (detail::get_uint(is, 4) != 1)
        throw FormatError("unsupported checkpoint version in " + path);
    const auto count = detail::get_uint(is, 8);
    Checkpoint ckpt;
    for (std::uint64_t n = 0; n < count; ++n) {
        CheckpointEntry e;
        const auto len = detail::get_uint(is, 4);
        e.name.resize(len);
        is.read(e.name.data(), static_cast<std::streamsize>(len));
        const auto rank = detail::get_uint(is, 4);
        Shape shape(rank);
        for (auto& d : shape)
            d = detail::get_uint(is, 8);
        std::vector<double> values(numel(shape));
        for (double& v : values)
            v = std::bit_cast<double>(detail::get_uint(is, 8));
        e.tensor = Tensor(std::move(shape), std::move(values));
        ckpt.entries.push_back(std::move(e));
    }

    std::ifstream ms(manifest_path(path));
    if (!ms)
        throw UsageError("missing manifest for checkpoint " + path);
    std::string line;
    while (std::getline(ms, line)) {
        if (line.empty() || line.rfind("# ", 0) == 0)
            continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos)
                ckpt.metadata[line.substr(1, eq - 1)] = line.substr(eq + 1);
            continue;
        }
        std::istringstream ls(line);
        std::string name, shape, frozen;
        std::getline(ls, name, '\t');
        std::getline(ls, shape, '\t');
        std::getline(ls, frozen, '\t');
        for (auto& e : ckpt.entries)
            if (e.name == name)
                e.frozen = frozen == "frozen";
    }
    return ckpt;
}

/// Copies checkpoint values into `params` by name; shapes must match.
inline void restore_parameters(ParameterList& params, const Checkpoint& ckpt)
{
    for (auto& p : params) {
        const auto* e = ckpt.find(p.name);
        if (!e)
            throw ConfigError("checkpoint lacks parameter '" + p.name + "'");
        if (e->tensor.shape() != p.tensor.shape())
            throw ShapeError("checkpoint shape " + to_string(e->tensor.shape()) + " for '" + p.name
                             + "' does not match " + to_string(p.tensor.shape()));
        auto dst = p.tensor.mutable_data();
        std::copy(e->tensor.data().begin(), e->tensor.data().end(), dst.begin());
    }
}

inline Checkpoint snapshot(const ParameterList& params)
{
    Checkpoint ckpt;
    for (const auto& p : params)
        ckpt.entries.push_back({p.name, p.tensor.detach(), p.frozen});
    return ckpt;
}

} // namespace xbus
