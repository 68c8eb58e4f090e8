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

// The `xbusnet` command line: synth, train, eval, predict, gradcam.
//
// Exit codes: 0 success, 2 usage, configuration or input error, 3 numeric
// failure during training or inference.

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xbus/core/checkpoint.hpp"
#include "xbus/data/dataset.hpp"
#include "xbus/data/folds.hpp"
#include "xbus/data/phantom.hpp"
#include "xbus/eval/overlay.hpp"
#include "xbus/eval/report.hpp"
#include "xbus/model/gradcam.hpp"
#include "xbus/model/inference.hpp"
#include "xbus/model/train.hpp"

namespace xbus::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Run-level keys that may appear in a config file next to the model and
/// training keys.
struct RunConfig {
    std::string data;
    std::string checkpoint;
    std::string report;
    std::size_t folds = 5;
    std::uint64_t fold_seed = 0;
};

struct EffectiveConfig {
    model::ModelConfig model;
    model::TrainConfig train;
    RunConfig run;
};

namespace detail {

inline std::string exact(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_exact(const std::string& key, const std::string& v)
{
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size())
            return d;
    } catch (const std::exception&) {
    }
    throw FormatError("checkpoint metadata '" + key + "' is not a number: '" + v + "'");
}

inline const std::string& require_meta(const Checkpoint& ck, const std::string& key)
{
    const auto it = ck.metadata.find(key);
    if (it == ck.metadata.end())
        throw FormatError("checkpoint lacks metadata '" + key + "'; was it written by `xbusnet train`?");
    return it->second;
}

inline void require_file(const std::string& path, const char* what)
{
    if (path.empty())
        throw UsageError(std::string("missing ") + what);
    if (!std::filesystem::exists(path))
        throw UsageError(std::string(what) + " not found: " + path);
}

} // namespace detail

/// Splits "run.*" keys off, applies the rest to the model/train configs.
inline EffectiveConfig load_effective_config(const std::string& path)
{
    EffectiveConfig c;
    if (path.empty())
        return c;
    auto map = model::read_config_file(path);
    for (auto it = map.begin(); it != map.end();) {
        const auto& [k, v] = *it;
        if (k.rfind("run.", 0) != 0) {
            ++it;
            continue;
        }
        if (k == "run.data")
            c.run.data = v;
        else if (k == "run.checkpoint")
            c.run.checkpoint = v;
        else if (k == "run.report")
            c.run.report = v;
        else if (k == "run.folds")
            c.run.folds = model::detail::to_uint(k, v);
        else if (k == "run.fold_seed")
            c.run.fold_seed = model::detail::to_uint(k, v);
        else
            throw ConfigError("unknown config key '" + k + "'");
        it = map.erase(it);
    }
    model::apply_config(map, c.model, c.train);
    return c;
}

/// Training-side facts stored next to the weights.
struct FoldInfo {
    std::size_t fold_index = 0;
    std::size_t fold_count = 5;
    std::uint64_t fold_seed = 0;
    prompt::SizeBins bins;
};

inline void put_fold_info(Checkpoint& ck, const FoldInfo& f, const model::TrainConfig& t)
{
    ck.metadata["fold.index"] = std::to_string(f.fold_index);
    ck.metadata["fold.count"] = std::to_string(f.fold_count);
    ck.metadata["fold.seed"] = std::to_string(f.fold_seed);
    ck.metadata["size_bins.t1"] = detail::exact(f.bins.t1);
    ck.metadata["size_bins.t2"] = detail::exact(f.bins.t2);
    for (const auto& [k, v] : model::to_config_map(t))
        ck.metadata[k] = v;
}

inline FoldInfo get_fold_info(const Checkpoint& ck)
{
    FoldInfo f;
    f.fold_index = model::detail::to_uint("fold.index", detail::require_meta(ck, "fold.index"));
    f.fold_count = model::detail::to_uint("fold.count", detail::require_meta(ck, "fold.count"));
    f.fold_seed = model::detail::to_uint("fold.seed", detail::require_meta(ck, "fold.seed"));
    f.bins.t1 = detail::parse_exact("size_bins.t1", detail::require_meta(ck, "size_bins.t1"));
    f.bins.t2 = detail::parse_exact("size_bins.t2", detail::require_meta(ck, "size_bins.t2"));
    return f;
}

/// Parses one metadata row (no header) in the dataset CSV layout. The mask
/// path column is dropped.
inline prompt::InferenceMetadata parse_meta_row(const std::string& row)
{
    const auto table = prompt::parse_metadata_csv_text(prompt::metadata_csv_header() + row + "\n");
    if (table.records.size() != 1)
        throw UsageError("--meta-row must hold exactly one metadata record");
    return prompt::InferenceMetadata::from(table.records[0]);
}

inline std::string replace_fold(std::string pattern, std::size_t fold)
{
    const std::string key = "{fold}";
    for (auto pos = pattern.find(key); pos != std::string::npos; pos = pattern.find(key))
        pattern.replace(pos, key.size(), std::to_string(fold));
    return pattern;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    std::size_t count = 200;
    std::uint64_t seed = 42;
    std::size_t size = 64;
};

inline int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err)
{
    data::SyntheticConfig cfg;
    cfg.count = a.count;
    cfg.seed = a.seed;
    cfg.image_size = a.size;
    data::validate(cfg);
    if (a.count == 0)
        err << "warning: --count 0 writes an empty dataset\n";
    data::write_dataset(a.out, data::generate_phantoms(cfg));
    out << "wrote " << a.count << " phantoms to " << a.out << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string config;
    std::string data;
    std::string out;
    std::string trace;
    std::optional<std::size_t> fold;
    std::optional<std::size_t> iterations;
    std::optional<std::uint64_t> seed;
    std::size_t log_every = 50;
};

inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err)
{
    auto cfg = load_effective_config(a.config);
    if (!a.data.empty())
        cfg.run.data = a.data;
    if (!a.out.empty())
        cfg.run.checkpoint = a.out;
    if (a.iterations)
        cfg.train.iterations = *a.iterations;
    if (a.seed)
        cfg.train.seed = *a.seed;
    if (!a.fold)
        throw UsageError("--fold is required");
    if (*a.fold >= cfg.run.folds)
        throw UsageError("--fold must lie in [0, " + std::to_string(cfg.run.folds) + ")");
    if (cfg.run.checkpoint.empty())
        throw UsageError("missing --out (or run.checkpoint)");
    detail::require_file(cfg.run.data, "data directory");
    model::validate(cfg.model);
    model::validate(cfg.train);

    const auto loaded = data::load_dataset(cfg.run.data);
    for (const auto& w : loaded.warnings)
        err << "warning: " << w << "\n";
    for (const auto& e : loaded.errors)
        err << "error: " << e << "\n";
    std::vector<std::string> ids;
    for (const auto& s : loaded.samples)
        ids.push_back(s.metadata.image_id);
    const auto folds = data::make_folds(ids, cfg.run.folds, cfg.run.fold_seed);
    const auto& split = folds[*a.fold];
    const std::set<std::string> train_ids(split.train_ids.begin(), split.train_ids.end());
    std::vector<data::Sample> train;
    for (const auto& s : loaded.samples)
        if (train_ids.count(s.metadata.image_id))
            train.push_back(s);

    model::XBusNet net(cfg.model);
    model::TrainHooks hooks;
    hooks.after_step = [&](std::size_t it, double loss) {
        if (!std::isfinite(loss))
            throw NumericError("non-finite loss at iteration " + std::to_string(it));
        if (a.log_every && ((it + 1) % a.log_every == 0 || it + 1 == cfg.train.iterations))
            out << "fold " << *a.fold << " iter " << it + 1 << "/" << cfg.train.iterations << " loss "
                << detail::exact(loss) << "\n";
        return false;
    };
    const auto result = model::train_fold(net, train, split.val_ids, cfg.train, hooks);

    auto ck = net.checkpoint();
    put_fold_info(ck, {*a.fold, cfg.run.folds, cfg.run.fold_seed, result.size_bins}, cfg.train);
    const std::filesystem::path ck_path(cfg.run.checkpoint);
    if (ck_path.has_parent_path())
        std::filesystem::create_directories(ck_path.parent_path());
    save_checkpoint(cfg.run.checkpoint, ck);

    const std::string trace_path = a.trace.empty() ? cfg.run.checkpoint + ".trace.csv" : a.trace;
    std::ofstream tr(trace_path);
    if (!tr)
        throw UsageError("cannot write loss trace " + trace_path);
    tr << "iteration,loss\n";
    for (std::size_t i = 0; i < result.loss_trace.size(); ++i)
        tr << i + 1 << "," << detail::exact(result.loss_trace[i]) << "\n";
    out << "checkpoint " << cfg.run.checkpoint << "\ntrace " << trace_path << "\n";
    return kExitOk;
}

struct EvalArgs {
    std::string ckpt;   // may contain {fold}
    std::string data;
    std::string report;
    std::string folds = "all";
    bool overlays = true;
};

inline std::vector<std::size_t> parse_fold_list(const std::string& list, std::size_t count)
{
    std::vector<std::size_t> out;
    if (list == "all") {
        for (std::size_t f = 0; f < count; ++f)
            out.push_back(f);
        return out;
    }
    for (const auto v : model::detail::to_list("--folds", list)) {
        if (v >= count)
            throw UsageError("--folds entry " + std::to_string(v) + " outside [0, " + std::to_string(count) + ")");
        out.push_back(v);
    }
    return out;
}

inline int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err)
{
    if (a.report.empty())
        throw UsageError("missing --report");
    detail::require_file(a.data, "data directory");
    const auto loaded = data::load_dataset(a.data);
    for (const auto& w : loaded.warnings)
        err << "warning: " << w << "\n";
    for (const auto& e : loaded.errors)
        err << "error: " << e << "\n";
    std::map<std::string, const data::Sample*> by_id;
    std::vector<std::string> ids;
    for (const auto& s : loaded.samples) {
        by_id[s.metadata.image_id] = &s;
        ids.push_back(s.metadata.image_id);
    }

    // The fold layout comes from the first checkpoint; every checkpoint must agree.
    const auto first_path = replace_fold(a.ckpt, 0);
    std::size_t fold_count = 5;
    if (a.folds != "all" && a.ckpt.find("{fold}") == std::string::npos) {
        detail::require_file(a.ckpt, "checkpoint");
        fold_count = get_fold_info(load_checkpoint(a.ckpt)).fold_count;
    } else {
        detail::require_file(first_path, "checkpoint");
        fold_count = get_fold_info(load_checkpoint(first_path)).fold_count;
    }
    const auto fold_list = parse_fold_list(a.folds, fold_count);

    for (const auto f : fold_list)
        detail::require_file(replace_fold(a.ckpt, f), "checkpoint");

    std::vector<eval::ImageMetrics> two_pass, pass1;
    nlohmann::ordered_json cfg_echo;
    const std::filesystem::path report_dir(a.report);
    if (a.overlays)
        std::filesystem::create_directories(report_dir / "overlays");
    for (const auto f : fold_list) {
        const auto path = replace_fold(a.ckpt, f);
        const auto ck = load_checkpoint(path);
        const auto info = get_fold_info(ck);
        if (info.fold_index != f || info.fold_count != fold_count)
            throw UsageError("checkpoint " + path + " was trained for fold " + std::to_string(info.fold_index)
                             + " of " + std::to_string(info.fold_count) + ", expected fold " + std::to_string(f));
        if (cfg_echo.empty()) {
            for (const auto& [k, v] : ck.metadata)
                if (k.rfind("fold.index", 0) != 0 && k.rfind("size_bins.", 0) != 0)
                    cfg_echo[k] = v;
            cfg_echo["data"] = a.data;
        }
        cfg_echo["size_bins.fold" + std::to_string(f)] = {info.bins.t1, info.bins.t2};
        const auto net = model::load_network(ck);
        const auto split = data::make_folds(ids, info.fold_count, info.fold_seed)[f];
        for (const auto& id : split.val_ids) {
            const auto& s = *by_id.at(id);
            // Only mask-free metadata reaches the predictor.
            const auto meta = prompt::InferenceMetadata::from(s.metadata);
            const auto r = model::two_pass_predict(net, s.image, meta, info.bins);
            two_pass.push_back(eval::image_metrics(id, f, r.mask, s.mask));
            const auto p1 = model::detail::resize_probability(r.pass1_probability, s.height(), s.width());
            pass1.push_back(eval::image_metrics(id, f, model::binarize(p1, model::kSegThreshold), s.mask));
            if (a.overlays)
                data::write_rgb((report_dir / "overlays" / (id + "_overlay.png")).string(),
                                eval::render_overlay(r.mask, s.mask, data::to_rgb(s.image)));
        }
        out << "fold " << f << ": " << split.val_ids.size() << " images\n";
    }
    const auto report = eval::build_report(cfg_echo, two_pass, pass1);
    eval::write_report(report_dir, report);
    const auto& sm = report.summary;
    out << "dice " << sm.dice.mean << " +/- " << sm.dice.sd << ", iou " << sm.iou.mean << " +/- " << sm.iou.sd
        << "\nreport " << (report_dir / "report.json").string() << "\n";
    return kExitOk;
}

struct PredictArgs {
    std::string ckpt;
    std::string image;
    std::string meta_row;
    std::string out_mask;
    std::string diagnostics;
    std::string proposal;
};

/// Loads an image and runs the two-pass procedure with the checkpoint's bins.
inline model::TwoPassResult predict_image(const model::XBusNet& net, const FoldInfo& info, const std::string& image,
                                          const prompt::InferenceMetadata& meta, Tensor* image_out = nullptr)
{
    const Tensor x = data::to_tensor(data::read_rgb(image));
    if (image_out)
        *image_out = x;
    return model::two_pass_predict(net, x, meta, info.bins);
}

inline int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream&)
{
    detail::require_file(a.ckpt, "checkpoint");
    detail::require_file(a.image, "image");
    if (a.meta_row.empty())
        throw UsageError("missing --meta-row");
    if (a.out_mask.empty())
        throw UsageError("missing --out");
    const auto ck = load_checkpoint(a.ckpt);
    const auto info = get_fold_info(ck);
    const auto net = model::load_network(ck);
    const auto r = predict_image(net, info, a.image, parse_meta_row(a.meta_row));
    data::write_mask(a.out_mask, r.mask);
    const std::string proposal = a.proposal.empty() ? a.out_mask + ".proposal.png" : a.proposal;
    data::write_mask(proposal, data::resize_mask(r.proposal, r.mask.height, r.mask.width));
    const std::string diag = a.diagnostics.empty() ? a.out_mask + ".json" : a.diagnostics;
    std::ofstream js(diag);
    if (!js)
        throw UsageError("cannot write diagnostics " + diag);
    js << r.diagnostics.to_json().dump(2) << "\n";
    out << "mask " << a.out_mask << "\nproposal " << proposal << "\ndiagnostics " << diag << "\n";
    return kExitOk;
}

struct GradcamArgs {
    std::string ckpt;
    std::string image;
    std::string meta_row;
    std::string layer = model::kDefaultCamLayer;
    std::string out;
    std::string overlay;
};

inline int cmd_gradcam(const GradcamArgs& a, std::ostream& out, std::ostream&)
{
    detail::require_file(a.ckpt, "checkpoint");
    detail::require_file(a.image, "image");
    if (a.meta_row.empty())
        throw UsageError("missing --meta-row");
    if (a.out.empty())
        throw UsageError("missing --out");
    const auto ck = load_checkpoint(a.ckpt);
    const auto info = get_fold_info(ck);
    auto net = model::load_network(ck);
    Tensor image;
    const auto r = predict_image(net, info, a.image, parse_meta_row(a.meta_row), &image);
    const auto& d = r.diagnostics;
    const std::string global = d.fallback ? d.pass1_global_prompt : d.pass2_global_prompt;

    const std::size_t S = net.config().image_size(), H = image.dim(1), W = image.dim(2);
    model::ForwardInput in;
    in.image = reshape(H == S && W == S ? image : data::resize_image(image, S, S), {1, 3, S, S});
    in.e_c = model::row_tensor(net.text_encoder().encode_text(global));
    in.e_l = model::row_tensor(net.text_encoder().encode_text(d.local_prompt));
    const auto heat = model::detail::resize_probability(model::grad_cam(net, in, a.layer), H, W);

    std::vector<std::uint8_t> gray(H * W);
    for (std::size_t i = 0; i < gray.size(); ++i)
        gray[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(heat.values[i], 0.0, 1.0)));
    data::write_gray8(a.out, H, W, gray);
    if (!a.overlay.empty()) {
        RgbImage blend = data::to_rgb(image);
        for (std::size_t i = 0; i < H * W; ++i) {
            const double h = 0.6 * std::clamp(heat.values[i], 0.0, 1.0);
            auto* px = &blend.rgb[i * 3];
            px[0] = static_cast<std::uint8_t>(std::lround((1.0 - h) * px[0] + h * 255.0));
            px[1] = static_cast<std::uint8_t>(std::lround((1.0 - h) * px[1]));
            px[2] = static_cast<std::uint8_t>(std::lround((1.0 - h) * px[2]));
        }
        data::write_rgb(a.overlay, blend);
    }
    out << "heatmap " << a.out << " (layer " << a.layer << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

/// Parses and dispatches. `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"XBusNet text-guided lesion segmentation", "xbusnet"};
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic phantom dataset");
    synth->add_option("--out", sa.out, "Output directory")->required();
    synth->add_option("--count", sa.count, "Number of phantoms");
    synth->add_option("--seed", sa.seed, "Generator seed");
    synth->add_option("--size", sa.size, "Image side in pixels");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train one cross-validation fold");
    train->add_option("--config", ta.config, "key=value config file");
    train->add_option("--data", ta.data, "Dataset root (overrides run.data)");
    train->add_option("--fold", ta.fold, "Fold index");
    train->add_option("--out", ta.out, "Checkpoint path (overrides run.checkpoint)");
    train->add_option("--trace", ta.trace, "Loss trace CSV (default <out>.trace.csv)");
    train->add_option("--iterations", ta.iterations, "Override train.iterations");
    train->add_option("--seed", ta.seed, "Override train.seed");
    train->add_option("--log-every", ta.log_every, "Progress line interval (0 = quiet)");

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "Two-pass evaluation of trained folds");
    ev->add_option("--ckpt", ea.ckpt, "Checkpoint path; {fold} expands to the fold index")->required();
    ev->add_option("--data", ea.data, "Dataset root")->required();
    ev->add_option("--report", ea.report, "Report directory")->required();
    ev->add_option("--folds", ea.folds, "'all' or a comma-separated list");
    ev->add_flag("!--no-overlays", ea.overlays, "Skip overlay PNGs");

    PredictArgs pa;
    auto* pr = app.add_subcommand("predict", "Mask-free two-pass prediction for one image");
    pr->add_option("--ckpt", pa.ckpt, "Checkpoint")->required();
    pr->add_option("--image", pa.image, "Input PNG")->required();
    pr->add_option("--meta-row", pa.meta_row, "One metadata CSV row")->required();
    pr->add_option("--out", pa.out_mask, "Output mask PNG")->required();
    pr->add_option("--diagnostics", pa.diagnostics, "Diagnostics JSON (default <out>.json)");
    pr->add_option("--proposal", pa.proposal, "Pass-1 proposal PNG (default <out>.proposal.png)");

    GradcamArgs ga;
    auto* gc = app.add_subcommand("gradcam", "Grad-CAM heatmap for one image");
    gc->add_option("--ckpt", ga.ckpt, "Checkpoint")->required();
    gc->add_option("--image", ga.image, "Input PNG")->required();
    gc->add_option("--meta-row", ga.meta_row, "One metadata CSV row")->required();
    gc->add_option("--layer", ga.layer, "Target layer (default F_fused)");
    gc->add_option("--out", ga.out, "Heatmap PNG")->required();
    gc->add_option("--overlay", ga.overlay, "Optional blended overlay PNG");

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*synth)
            return cmd_synth(sa, out, err);
        if (*train)
            return cmd_train(ta, out, err);
        if (*ev)
            return cmd_eval(ea, out, err);
        if (*pr)
            return cmd_predict(pa, out, err);
        return cmd_gradcam(ga, out, err);
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

} // namespace xbus::cli
