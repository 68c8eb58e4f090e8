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

#include <cctype>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "xbus/prompt/metadata.hpp"

namespace xbus::prompt {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnknownId = 1;

/// Closed word vocabulary covering every template output.
class Vocabulary {
public:
    Vocabulary()
    {
        for (const char* w : {"<pad>", "<unk>", "a", "an", "at", "in", "of", "the", "lesion",
                              "breast", "quadrant", "unknown", "location", "small", "medium",
                              "large", "upper", "lower", "inner", "outer", "shape", "margin",
                              "bi", "rads", ",", "-"})
            add(w);
        for (auto w : kShapeNames)
            add(std::string(w));
        for (auto w : kMarginNames)
            add(std::string(w));
        for (auto w : kBiradsNames)
            add(std::string(w));
    }

    std::size_t size() const { return words_.size(); }
    const std::string& word(std::size_t id) const { return words_.at(id); }

    std::size_t id(const std::string& w) const
    {
        const auto it = ids_.find(w);
        return it == ids_.end() ? kUnknownId : it->second;
    }

    bool contains(const std::string& w) const { return ids_.count(w) != 0; }

    /// token<TAB>id, one per line, in id order.
    void write(const std::string& path) const
    {
        std::ofstream os(path);
        if (!os)
            throw UsageError("cannot write vocabulary to " + path);
        for (std::size_t i = 0; i < words_.size(); ++i)
            os << words_[i] << '\t' << i << '\n';
    }

private:
    void add(const std::string& w)
    {
        if (ids_.emplace(w, words_.size()).second)
            words_.push_back(w);
    }

    std::vector<std::string> words_;
    std::map<std::string, std::size_t> ids_;
};

struct TokenSequence {
    std::vector<std::size_t> ids;
    std::size_t unknown_count = 0;
    std::vector<std::string> warnings;

    friend bool operator==(const TokenSequence& a, const TokenSequence& b) { return a.ids == b.ids; }
};

/// Lower-cased word split: runs of [a-z0-9] form words, every other
/// non-space character is its own token.
inline std::vector<std::string> split_words(const std::string& text)
{
    std::vector<std::string> words;
    std::string cur;
    for (char raw : text) {
        const auto c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur += c;
            continue;
        }
        if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
        if (!std::isspace(static_cast<unsigned char>(c)))
            words.emplace_back(1, c);
    }
    if (!cur.empty())
        words.push_back(cur);
    return words;
}

/// Right-padded to `length` with the pad id; longer texts are truncated.
/// Unknown words map to the unknown id and are counted.
inline TokenSequence tokenize(const std::string& text, const Vocabulary& vocab, std::size_t length)
{
    TokenSequence seq;
    seq.ids.assign(length, kPadId);
    const auto words = split_words(text);
    for (std::size_t i = 0; i < words.size() && i < length; ++i) {
        seq.ids[i] = vocab.id(words[i]);
        if (seq.ids[i] == kUnknownId) {
            ++seq.unknown_count;
            seq.warnings.push_back("out-of-vocabulary word '" + words[i] + "'");
        }
    }
    return seq;
}

} // namespace xbus::prompt
