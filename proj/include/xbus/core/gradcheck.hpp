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

#include <functional>

#include "xbus/core/tensor.hpp"

namespace xbus {

/// Compares the reverse-mode gradient of scalar `f` at `x` with central
/// differences of step `h`. Returns max_i |analytic - numeric| / max(1, |analytic|).
inline double gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                        double h = 1e-5)
{
    Tensor probe(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true);
    const Tensor y = f(probe);
    if (y.size() != 1)
        throw UsageError("gradcheck needs a scalar-valued function");
    backward(y);
    const std::vector<double> analytic = probe.grad();

    double worst = 0.0;
    std::vector<double> values(x.data().begin(), x.data().end());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        double f_plus = 0.0, f_minus = 0.0;
        const double up = saved + h;
        const double down = saved - h;
        {
            NoGradGuard guard;
            values[i] = up;
            f_plus = f(Tensor(x.shape(), values)).item();
            values[i] = down;
            f_minus = f(Tensor(x.shape(), values)).item();
        }
        values[i] = saved;
        // divide by the step actually represented, not the nominal 2h
        const double numeric = (f_plus - f_minus) / (up - down);
        const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace xbus
