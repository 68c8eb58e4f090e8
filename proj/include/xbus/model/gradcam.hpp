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

#include "xbus/model/network.hpp"
#include "xbus/model/postprocess.hpp"

namespace xbus::model {

inline constexpr const char* kDefaultCamLayer = "F_fused";

/// Heatmap in [0,1], row-major.
using Heatmap = ProbabilityMap;

/// ReLU(sum_k w_k A_k) with w_k the spatial mean of G_k, bilinearly resized
/// and min-max normalised. A and G are [C,h,w]. A map with no positive
/// value stays all zero.
inline Heatmap grad_cam_map(const Tensor& a, const Tensor& g, std::size_t out_h, std::size_t out_w)
{
    if (a.rank() != 3 || a.shape() != g.shape())
        throw ShapeError("grad_cam_map needs matching [C,h,w] activations and gradients");
    const std::size_t C = a.dim(0), h = a.dim(1), w = a.dim(2), hw = h * w;
    std::vector<double> cam(hw, 0.0);
    for (std::size_t k = 0; k < C; ++k) {
        double wk = 0.0;
        for (std::size_t i = 0; i < hw; ++i)
            wk += g.data()[k * hw + i];
        wk /= static_cast<double>(hw);
        for (std::size_t i = 0; i < hw; ++i)
            cam[i] += wk * a.data()[k * hw + i];
    }
    for (double& v : cam)
        v = std::max(v, 0.0);
    NoGradGuard no_grad;
    const Tensor up = bilinear_upsample(Tensor(Shape{h, w}, std::move(cam)), out_h, out_w);
    Heatmap out{out_h, out_w, std::vector<double>(up.data().begin(), up.data().end())};
    const auto [lo, hi] = std::minmax_element(out.values.begin(), out.values.end());
    const double mn = *lo, mx = *hi;
    if (mx <= 0.0) {
        std::fill(out.values.begin(), out.values.end(), 0.0);
    } else if (mx - mn <= 0.0) {
        std::fill(out.values.begin(), out.values.end(), 1.0);
    } else {
        for (double& v : out.values)
            v = (v - mn) / (mx - mn);
    }
    return out;
}

/// Names of layers that can be targeted for one network.
inline std::vector<std::string> grad_cam_layers(const XBusNet& net)
{
    const std::size_t s = net.config().image_size();
    FeatureTrace trace;
    NoGradGuard no_grad;
    ForwardInput in;
    in.image = Tensor(Shape{1, 3, s, s}, 0.5);
    in.e_c = Tensor(Shape{1, net.config().text.dim}, 0.0);
    in.e_l = in.e_c;
    net.forward(in, {.trace = &trace});
    std::vector<std::string> names;
    for (const auto& [k, v] : trace)
        if (v.rank() == 4)
            names.push_back(k);
    return names;
}

/// Grad-CAM of the summed foreground logits (P >= 0.5) of image 0 with
/// respect to `layer`. Parameter gradients are cleared afterwards.
inline Heatmap grad_cam(XBusNet& net, const ForwardInput& in, const std::string& layer = kDefaultCamLayer)
{
    FeatureTrace trace;
    const Tensor logits = net.forward(in, {.trace = &trace});
    const auto it = trace.find(layer);
    if (it == trace.end() || it->second.rank() != 4) {
        std::string valid;
        for (const auto& name : grad_cam_layers(net))
            valid += (valid.empty() ? "" : ", ") + name;
        throw UsageError("unknown Grad-CAM layer '" + layer + "'; valid layers: " + valid);
    }
    const std::size_t H = logits.dim(2), W = logits.dim(3);
    std::vector<double> fg(logits.size(), 0.0);
    for (std::size_t i = 0; i < H * W; ++i)
        fg[i] = logits.data()[i] >= 0.0 ? 1.0 : 0.0;
    const Tensor score = sum(mul(logits, Tensor(logits.shape(), std::move(fg))));
    const Tensor& act = it->second;
    const std::size_t C = act.dim(1), h = act.dim(2), w = act.dim(3);
    std::vector<double> grad(C * h * w, 0.0);
    if (score.requires_grad()) {
        backward(score);
        const auto g = act.grad();
        if (!g.empty())
            std::copy(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(C * h * w), grad.begin());
    }
    zero_grad(net.parameters());
    const Tensor a0(Shape{C, h, w}, std::vector<double>(act.data().begin(), act.data().begin() + static_cast<std::ptrdiff_t>(C * h * w)));
    return grad_cam_map(a0, Tensor(Shape{C, h, w}, std::move(grad)), H, W);
}

} // namespace xbus::model
