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

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "xbus/core/rng.hpp"
#include "xbus/core/tensor.hpp"

namespace xbus {

/// A named tensor owned by a model. Frozen parameters never require grad
/// and are skipped by the optimizer.
struct Parameter {
    std::string name;
    Tensor tensor;
    bool frozen = false;
};

using ParameterList = std::vector<Parameter>;

/// Fan-in scaled uniform init U(-sqrt(3/fan_in), sqrt(3/fan_in)), i.e. unit
/// variance gain. Seeded per parameter name so adding a parameter elsewhere
/// does not shift every other draw.
inline Tensor init_uniform(Shape shape, std::size_t fan_in, std::uint64_t seed,
                           std::string_view name)
{
    Rng rng(mix_seed(seed, hash_name(name)));
    const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
    std::vector<double> v(numel(shape));
    for (double& x : v)
        x = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(v));
}

inline Tensor init_normal(Shape shape, double stddev, std::uint64_t seed, std::string_view name)
{
    Rng rng(mix_seed(seed, hash_name(name)));
    std::vector<double> v(numel(shape));
    for (double& x : v)
        x = stddev * rng.normal();
    return Tensor(std::move(shape), std::move(v));
}

/// base_lr * (1 + cos(pi * step / total)) / 2.
inline double cosine_lr(std::size_t step, std::size_t total, double base_lr)
{
    if (total == 0 || step > total)
        throw UsageError("cosine_lr: step " + std::to_string(step) + " outside [0, "
                         + std::to_string(total) + "]");
    return base_lr * 0.5
           * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step)
                             / static_cast<double>(total)));
}

struct AdamWConfig {
    double base_lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    std::size_t total_steps = 1000;
};

/// AdamW with decoupled weight decay. Moment buffers are created only for
/// trainable parameters, keyed by parameter name.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg) : cfg_(cfg) { }

    const AdamWConfig& config() const { return cfg_; }
    std::size_t step_count() const { return step_; }
    bool has_state(const std::string& name) const { return moments_.count(name) != 0; }

    /// One update at learning rate `lr`. Every trainable parameter must carry
    /// a gradient.
    void step(ParameterList& params, double lr)
    {
        for (const auto& p : params) {
            if (!p.frozen && !p.tensor.has_grad())
                throw UsageError("parameter '" + p.name + "' has no gradient");
        }
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (auto& p : params) {
            if (p.frozen)
                continue;
            auto& [m, v] = moments_[p.name];
            auto values = p.tensor.mutable_data();
            const auto g = p.tensor.grad();
            if (m.empty()) {
                m.assign(values.size(), 0.0);
                v.assign(values.size(), 0.0);
            }
            for (std::size_t i = 0; i < values.size(); ++i) {
                values[i] -= lr * cfg_.weight_decay * values[i];
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                values[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    /// Step at the cosine-scheduled rate for the current step index.
    void scheduled_step(ParameterList& params)
    {
        step(params, cosine_lr(step_, cfg_.total_steps, cfg_.base_lr));
    }

private:
    AdamWConfig cfg_;
    std::size_t step_ = 0;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments_;
};

inline void zero_grad(ParameterList& params)
{
    for (auto& p : params)
        p.tensor.zero_grad();
}

} // namespace xbus
