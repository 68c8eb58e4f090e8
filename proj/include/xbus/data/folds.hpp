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

#include <set>
#include <string>
#include <vector>

#include "xbus/core/errors.hpp"
#include "xbus/core/rng.hpp"

namespace xbus::data {

struct FoldSplit {
    std::size_t fold_index = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
};

/// Seeded shuffle, then K contiguous validation blocks; the first n % K
/// blocks hold one extra id. Training ids keep the input order.
inline std::vector<FoldSplit> make_folds(const std::vector<std::string>& ids, std::size_t k = 5,
                                         std::uint64_t seed = 0)
{
    if (k == 0 || k > ids.size())
        throw ConfigError("cannot split " + std::to_string(ids.size()) + " ids into " + std::to_string(k)
                          + " folds");
    if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size())
        throw ConfigError("fold ids must be unique");
    std::vector<std::string> order = ids;
    Rng rng(mix_seed(seed, 0xf01d));
    rng.shuffle(order.begin(), order.end());
    std::vector<FoldSplit> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = ids.size() / k + (f < ids.size() % k ? 1 : 0);
        folds[f].fold_index = f;
        folds[f].val_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                order.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
        const std::set<std::string> val(folds[f].val_ids.begin(), folds[f].val_ids.end());
        for (const auto& id : ids)
            if (!val.count(id))
                folds[f].train_ids.push_back(id);
    }
    return folds;
}

/// Throws ConfigError when an id appears in both sets.
inline void require_disjoint(const std::vector<std::string>& train, const std::vector<std::string>& val)
{
    const std::set<std::string> t(train.begin(), train.end());
    for (const auto& id : val)
        if (t.count(id))
            throw ConfigError("image '" + id + "' appears in both training and validation splits");
}

} // namespace xbus::data
