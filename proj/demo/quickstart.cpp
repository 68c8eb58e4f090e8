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

// Library walkthrough: synthesise phantoms, train the desk model briefly,
// run mask-free two-pass inference on a held-out image and score it.
//
//   quickstart [iterations] [output_dir]

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "xbus/xbus.hpp"

int main(int argc, char** argv)
{
    using namespace xbus;
    const std::size_t iterations = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 150;
    const std::filesystem::path out = argc > 2 ? argv[2] : "quickstart_out";
    std::filesystem::create_directories(out);

    data::SyntheticConfig synth;
    synth.count = 12;
    const auto samples = data::generate_phantoms(synth);
    const std::vector<data::Sample> train(samples.begin(), samples.end() - 1);
    const data::Sample& held_out = samples.back();

    model::XBusNet net(model::desk_profile());
    model::TrainConfig cfg;
    cfg.iterations = iterations;
    model::TrainHooks hooks;
    hooks.after_step = [&](std::size_t it, double loss) {
        if ((it + 1) % 25 == 0)
            std::cout << "iter " << it + 1 << " loss " << loss << "\n";
        return false;
    };
    const auto trained = model::train_fold(net, train, {held_out.metadata.image_id}, cfg, hooks);

    // Only mask-free metadata reaches the predictor.
    const auto meta = prompt::InferenceMetadata::from(held_out.metadata);
    const auto r = model::two_pass_predict(net, held_out.image, meta, trained.size_bins);
    std::cout << r.diagnostics.to_json().dump(2) << "\n";

    const auto m = eval::image_metrics(meta.image_id, 0, r.mask, held_out.mask);
    std::cout << "held-out dice " << m.dice << " iou " << m.iou << " fpr " << m.fpr << " fnr " << m.fnr << "\n";

    data::write_mask((out / "mask.png").string(), r.mask);
    data::write_rgb((out / "overlay.png").string(),
                    eval::render_overlay(r.mask, held_out.mask, data::to_rgb(held_out.image)));
    std::cout << "wrote " << (out / "mask.png").string() << " and " << (out / "overlay.png").string() << "\n";
    return 0;
}
