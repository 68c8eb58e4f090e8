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

#include "xbus/core/ops.hpp"

namespace xbus::model {

inline constexpr double kDiceSmooth = 1e-8;

inline void require_binary_target(const Tensor& logits, const Tensor& mask)
{
    if (logits.shape() != mask.shape())
        throw ShapeError("loss: logits " + to_string(logits.shape()) + " vs mask " + to_string(mask.shape()));
    if (logits.rank() != 4)
        throw ShapeError("loss expects [B,1,H,W], got " + to_string(logits.shape()));
    for (double v : mask.data())
        if (v != 0.0 && v != 1.0)
            throw UsageError("loss target must contain only 0 and 1");
}

/// mean(softplus(x) - y x), the numerically stable BCE with logits.
inline Tensor bce_with_logits(const Tensor& logits, const Tensor& mask)
{
    require_binary_target(logits, mask);
    return mean(sub(softplus(logits), mul(mask, logits)));
}

/// Per-image 1 - (2 sum(p y) + eps) / (sum p + sum y + eps), averaged over the batch.
inline Tensor soft_dice_loss(const Tensor& logits, const Tensor& mask)
{
    require_binary_target(logits, mask);
    const Tensor p = sigmoid(logits);
    const Tensor inter = sum(mul(p, mask), {1, 2, 3});
    const Tensor denom = add(sum(p, {1, 2, 3}), sum(mask, {1, 2, 3}));
    const Tensor dice = div(add_scalar(scale(inter, 2.0), kDiceSmooth), add_scalar(denom, kDiceSmooth));
    return mean(add_scalar(neg(dice), 1.0));
}

struct LossWeights {
    double bce = 0.5;
    double dice = 0.5;
};

inline Tensor segmentation_loss(const Tensor& logits, const Tensor& mask, LossWeights w = {})
{
    return add(scale(bce_with_logits(logits, mask), w.bce), scale(soft_dice_loss(logits, mask), w.dice));
}

} // namespace xbus::model
