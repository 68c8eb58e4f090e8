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

// Mask-free two-pass prediction. The first pass runs with the location
// replaced by "unknown"; its thresholded, largest-component proposal gives
// the centroid and quadrant used by the second pass.

#pragma once

#include <json.hpp>

#include "xbus/data/sample.hpp"
#include "xbus/model/network.hpp"
#include "xbus/model/postprocess.hpp"

namespace xbus::model {

inline constexpr double kProposalThreshold = 0.30;
inline constexpr double kSegThreshold = 0.5;

struct TwoPassDiagnostics {
    std::string image_id;
    double proposal_threshold = kProposalThreshold;
    double seg_threshold = kSegThreshold;
    std::string pass1_global_prompt;
    std::string pass2_global_prompt; // empty on fallback
    std::string local_prompt;
    std::size_t component_size = 0;
    std::optional<prompt::Centroid> centroid;
    std::optional<prompt::Quadrant> quadrant;
    bool fallback = false;

    nlohmann::ordered_json to_json() const
    {
        nlohmann::ordered_json j;
        j["image_id"] = image_id;
        j["tau_proposal"] = proposal_threshold;
        j["tau_seg"] = seg_threshold;
        j["pass1_global_prompt"] = pass1_global_prompt;
        j["pass2_global_prompt"] = fallback ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(pass2_global_prompt);
        j["local_prompt"] = local_prompt;
        j["component_size"] = component_size;
        if (centroid)
            j["centroid"] = {{"cx", centroid->cx}, {"cy", centroid->cy}};
        else
            j["centroid"] = "fallback";
        j["quadrant"] = quadrant ? nlohmann::ordered_json(std::string(prompt::name_of(*quadrant)))
                                 : nlohmann::ordered_json(nullptr);
        j["fallback"] = fallback;
        return j;
    }
};

struct TwoPassResult {
    ProbabilityMap probability;   // at the input image resolution
    Mask mask;                    // probability >= tau_seg
    ProbabilityMap pass1_probability;
    Mask proposal;                // largest component at tau = 0.30, model resolution
    TwoPassDiagnostics diagnostics;
};

namespace detail {

inline ProbabilityMap resize_probability(const ProbabilityMap& p, std::size_t h, std::size_t w)
{
    if (p.height == h && p.width == w)
        return p;
    NoGradGuard no_grad;
    const Tensor t(Shape{p.height, p.width}, p.values);
    const Tensor r = bilinear_upsample(t, h, w);
    return {h, w, std::vector<double>(r.data().begin(), r.data().end())};
}

} // namespace detail

/// Location estimate from a pass-1 probability map: threshold at 0.30, keep
/// the largest 4-connected component and map its centroid to a quadrant.
struct LocationEstimate {
    Mask proposal;
    std::optional<prompt::Centroid> centroid;
    std::optional<prompt::Quadrant> quadrant;
};

inline LocationEstimate estimate_location(const ProbabilityMap& pass1)
{
    LocationEstimate e;
    e.proposal = largest_connected_component(binarize(pass1, kProposalThreshold));
    if (!e.proposal.empty()) {
        e.centroid = prompt::centroid_from_mask(e.proposal);
        e.quadrant = prompt::quadrant_of(*e.centroid, pass1.height, pass1.width);
    }
    return e;
}

/// Runs one forward pass for a single image [3,S,S] with the given prompts.
inline ProbabilityMap predict_once(const XBusNet& net, const Tensor& image, const std::vector<Tensor>& taps,
                                   const std::string& global_text, const std::string& local_text)
{
    NoGradGuard no_grad;
    ForwardInput in;
    in.image = reshape(image, {1, 3, image.dim(1), image.dim(2)});
    in.e_c = Tensor(Shape{1, net.config().text.dim}, net.text_encoder().encode_text(global_text));
    in.e_l = Tensor(Shape{1, net.config().text.dim}, net.text_encoder().encode_text(local_text));
    in.vit_taps = taps;
    return probabilities(net.forward(in))[0];
}

/// Two-pass prediction for one image [3,H,W]. Takes metadata without any
/// mask reference; `bins` are the training-fold size bins.
inline TwoPassResult two_pass_predict(const XBusNet& net, const Tensor& image,
                                      const prompt::InferenceMetadata& meta, const prompt::SizeBins& bins)
{
    if (image.rank() != 3 || image.dim(0) != 3)
        throw ShapeError("two_pass_predict expects [3,H,W], got " + to_string(image.shape()));
    const std::size_t H = image.dim(1), W = image.dim(2), S = net.config().image_size();
    const Tensor x = (H == S && W == S) ? image : data::resize_image(image, S, S);
    std::vector<Tensor> taps;
    {
        NoGradGuard no_grad;
        taps = net.gfe().taps(reshape(x, {1, 3, S, S}));
    }
    const auto size = prompt::discretize_size(meta.size_value, bins);

    TwoPassResult r;
    auto& d = r.diagnostics;
    d.image_id = meta.image_id;
    d.local_prompt = prompt::verbalize_local(meta);
    d.pass1_global_prompt = prompt::verbalize_global(size, std::nullopt);
    r.pass1_probability = predict_once(net, x, taps, d.pass1_global_prompt, d.local_prompt);
    auto loc = estimate_location(r.pass1_probability);
    r.proposal = std::move(loc.proposal);
    d.component_size = r.proposal.count();
    d.centroid = loc.centroid;
    d.quadrant = loc.quadrant;

    ProbabilityMap final_p;
    if (!d.quadrant) {
        d.fallback = true;
        final_p = r.pass1_probability;
    } else {
        d.pass2_global_prompt = prompt::verbalize_global(size, d.quadrant);
        final_p = predict_once(net, x, taps, d.pass2_global_prompt, d.local_prompt);
    }
    r.probability = detail::resize_probability(final_p, H, W);
    r.mask = binarize(r.probability, kSegThreshold);
    return r;
}

} // namespace xbus::model
