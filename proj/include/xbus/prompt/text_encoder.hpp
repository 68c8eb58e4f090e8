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

#include "xbus/nn/layers.hpp"
#include "xbus/prompt/prompts.hpp"
#include "xbus/prompt/tokenizer.hpp"

namespace xbus::prompt {

struct TextEncoderConfig {
    std::size_t dim = 64;
    std::size_t heads = 4;
    std::size_t layers = 2;
    std::size_t max_tokens = 16;
};

using Embedding = std::vector<double>;

/// Small frozen transformer text encoder. The embedding of a prompt is the
/// final-layer representation at token position 0.
class TextEncoder {
public:
    TextEncoder(nn::ParamBuilder b, TextEncoderConfig cfg = {})
      : cfg_(cfg)
    {
        auto fb = b.with_frozen(true);
        token_embedding_ = fb.normal("token_embedding", {vocab_.size(), cfg.dim}, 1.0);
        position_embedding_ = fb.normal("position_embedding", {cfg.max_tokens, cfg.dim}, 0.1);
        for (std::size_t i = 0; i < cfg.layers; ++i)
            blocks_.emplace_back(fb.sub("block" + std::to_string(i)), cfg.dim, cfg.heads);
        final_norm_ = nn::LayerNorm(fb.sub("final_norm"), cfg.dim);
    }

    const TextEncoderConfig& config() const { return cfg_; }
    const Vocabulary& vocabulary() const { return vocab_; }
    std::size_t dim() const { return cfg_.dim; }

    TokenSequence tokenize(const std::string& text) const
    {
        return prompt::tokenize(text, vocab_, cfg_.max_tokens);
    }

    Embedding encode(const TokenSequence& tokens) const
    {
        if (tokens.ids.size() != cfg_.max_tokens)
            throw ShapeError("token sequence of length " + std::to_string(tokens.ids.size())
                             + ", encoder expects " + std::to_string(cfg_.max_tokens));
        NoGradGuard no_grad;
        const std::size_t L = cfg_.max_tokens, D = cfg_.dim;
        std::vector<double> x(L * D);
        const auto emb = token_embedding_.data();
        const auto pos = position_embedding_.data();
        for (std::size_t t = 0; t < L; ++t) {
            const std::size_t id = tokens.ids[t];
            if (id >= vocab_.size())
                throw ShapeError("token id " + std::to_string(id) + " outside vocabulary");
            for (std::size_t d = 0; d < D; ++d)
                x[t * D + d] = emb[id * D + d] + pos[t * D + d];
        }
        Tensor h(Shape{1, L, D}, std::move(x));
        for (const auto& blk : blocks_)
            h = blk(h);
        h = final_norm_(h);
        return Embedding(h.data().begin(), h.data().begin() + static_cast<std::ptrdiff_t>(D));
    }

    Embedding encode_text(const std::string& text) const { return encode(tokenize(text)); }

private:
    TextEncoderConfig cfg_;
    Vocabulary vocab_;
    Tensor token_embedding_, position_embedding_;
    std::vector<nn::TransformerBlock> blocks_;
    nn::LayerNorm final_norm_;
};

/// Verbalized prompts and their embeddings.
struct PromptPair {
    std::string global_text;
    std::string local_text;
    Embedding global_embedding;
    Embedding local_embedding;
};

inline PromptPair make_prompts(const TextEncoder& enc, std::string global_text, std::string local_text)
{
    PromptPair p;
    p.global_embedding = enc.encode_text(global_text);
    p.local_embedding = enc.encode_text(local_text);
    p.global_text = std::move(global_text);
    p.local_text = std::move(local_text);
    return p;
}

} // namespace xbus::prompt
