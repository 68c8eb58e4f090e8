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

// Evaluation report: report.json (versioned schema) plus report.csv with one
// row per (fold, image).

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "xbus/eval/aggregate.hpp"
#include "xbus/eval/wilcoxon.hpp"

namespace xbus::eval {

inline constexpr int kReportSchemaVersion = 1;

/// Paired comparison of two-pass output against the pass-1 output on the
/// same images. `result` is empty when every difference is zero.
struct PairedTestEntry {
    std::string metric;
    std::string comparison;
    std::optional<PairedTestResult> result;
};

struct EvalReport {
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    double tau_seg = 0.5;
    double tau_proposal = 0.30;
    std::vector<ImageMetrics> per_image;  // two-pass
    std::vector<ImageMetrics> baseline;   // pass 1, same order as per_image
    std::vector<FoldSummary> folds;
    CrossFoldSummary summary;
    std::vector<SizeBinRow> size_bins;
    std::vector<PairedTestEntry> paired_tests;
};

inline constexpr const char* kPairedComparison = "two_pass_vs_pass1";

/// Aggregates per-image results into fold summaries, the cross-fold
/// summary, the size-bin table and paired tests on Dice and IoU.
inline EvalReport build_report(nlohmann::ordered_json config, std::vector<ImageMetrics> per_image,
                               std::vector<ImageMetrics> baseline)
{
    if (per_image.empty())
        throw UsageError("build_report: no evaluated images");
    if (baseline.size() != per_image.size())
        throw UsageError("build_report: baseline and two-pass lists differ in length");
    EvalReport r;
    r.config = std::move(config);
    std::map<std::size_t, std::vector<ImageMetrics>> by_fold;
    for (const auto& m : per_image)
        by_fold[m.fold].push_back(m);
    for (const auto& [k, v] : by_fold)
        r.folds.push_back(fold_mean(v, k));
    r.summary = cross_fold(r.folds);
    r.size_bins = size_bin_table(per_image);
    for (const char* metric : {"dice", "iou"}) {
        std::vector<double> a, b;
        for (std::size_t i = 0; i < per_image.size(); ++i) {
            const bool dice = std::string(metric) == "dice";
            a.push_back(dice ? per_image[i].dice : per_image[i].iou);
            b.push_back(dice ? baseline[i].dice : baseline[i].iou);
        }
        PairedTestEntry e{metric, kPairedComparison, std::nullopt};
        try {
            e.result = wilcoxon_signed_rank(a, b);
        } catch (const UndefinedTestError&) {
        }
        r.paired_tests.push_back(std::move(e));
    }
    r.per_image = std::move(per_image);
    r.baseline = std::move(baseline);
    return r;
}

namespace detail {

using oj = nlohmann::ordered_json;

inline oj opt(const std::optional<double>& v) { return v ? oj(*v) : oj(nullptr); }
inline std::optional<double> opt_from(const oj& j) { return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>()); }

inline oj metrics_json(const ImageMetrics& m)
{
    return {{"dice", m.dice}, {"iou", m.iou}, {"fpr", m.fpr}, {"fnr", m.fnr}};
}

} // namespace detail

inline nlohmann::ordered_json to_json(const EvalReport& r)
{
    using detail::oj;
    oj j;
    j["schema_version"] = kReportSchemaVersion;
    j["config"] = r.config;
    j["thresholds"] = {{"tau_seg", r.tau_seg}, {"tau_proposal", r.tau_proposal}};
    j["sd_kind"] = "sample";
    j["per_image"] = oj::array();
    for (std::size_t i = 0; i < r.per_image.size(); ++i) {
        const auto& m = r.per_image[i];
        oj row{{"fold", m.fold}, {"image_id", m.image_id}};
        row.update(detail::metrics_json(m));
        row["tumor_length_px"] = m.tumor_length_px;
        row["size_bin"] = kSizeBinLabels[static_cast<std::size_t>(size_bin(m.tumor_length_px))];
        row["pass1"] = detail::metrics_json(r.baseline[i]);
        j["per_image"].push_back(row);
    }
    j["folds"] = oj::array();
    for (const auto& f : r.folds)
        j["folds"].push_back({{"fold_index", f.fold_index}, {"n", f.n}, {"dice", f.dice},
                              {"iou", f.iou}, {"fpr", f.fpr}, {"fnr", f.fnr}});
    auto ms = [](const MeanSd& v) { return oj{{"mean", v.mean}, {"sd", v.sd}}; };
    j["summary"] = {{"folds", r.summary.folds}, {"dice", ms(r.summary.dice)}, {"iou", ms(r.summary.iou)},
                    {"fpr", ms(r.summary.fpr)}, {"fnr", ms(r.summary.fnr)}};
    j["size_bins"] = oj::array();
    for (const auto& b : r.size_bins)
        j["size_bins"].push_back({{"label", b.label}, {"n", b.n}, {"dice", detail::opt(b.dice)},
                                  {"iou", detail::opt(b.iou)}, {"fpr", detail::opt(b.fpr)},
                                  {"fnr", detail::opt(b.fnr)}});
    j["paired_tests"] = oj::array();
    for (const auto& t : r.paired_tests) {
        oj e{{"metric", t.metric}, {"comparison", t.comparison}, {"defined", t.result.has_value()}};
        if (t.result) {
            const auto& p = *t.result;
            e.update(oj{{"n", p.n}, {"W", p.w}, {"W_plus", p.w_plus}, {"W_minus", p.w_minus},
                        {"p", p.p}, {"r_rb", p.r_rb}, {"exact", p.exact}});
        } else {
            // Same keys either way; an undefined test has no nonzero differences.
            e.update(oj{{"n", 0}, {"W", nullptr}, {"W_plus", nullptr}, {"W_minus", nullptr},
                        {"p", nullptr}, {"r_rb", nullptr}, {"exact", nullptr}});
        }
        j["paired_tests"].push_back(e);
    }
    return j;
}

/// Inverse of to_json. Throws FormatError on a missing or mistyped field.
inline EvalReport report_from_json(const nlohmann::ordered_json& j)
{
    try {
        if (j.at("schema_version").get<int>() != kReportSchemaVersion)
            throw FormatError("unsupported report schema_version " + j.at("schema_version").dump());
        EvalReport r;
        r.config = j.at("config");
        r.tau_seg = j.at("thresholds").at("tau_seg").get<double>();
        r.tau_proposal = j.at("thresholds").at("tau_proposal").get<double>();
        for (const auto& row : j.at("per_image")) {
            ImageMetrics m{row.at("image_id").get<std::string>(), row.at("fold").get<std::size_t>(),
                           row.at("dice").get<double>(), row.at("iou").get<double>(),
                           row.at("fpr").get<double>(), row.at("fnr").get<double>(),
                           row.at("tumor_length_px").get<std::size_t>()};
            const auto& p1 = row.at("pass1");
            ImageMetrics b{m.image_id, m.fold, p1.at("dice").get<double>(), p1.at("iou").get<double>(),
                           p1.at("fpr").get<double>(), p1.at("fnr").get<double>(), m.tumor_length_px};
            r.per_image.push_back(std::move(m));
            r.baseline.push_back(std::move(b));
        }
        for (const auto& f : j.at("folds"))
            r.folds.push_back({f.at("fold_index").get<std::size_t>(), f.at("n").get<std::size_t>(),
                               f.at("dice").get<double>(), f.at("iou").get<double>(),
                               f.at("fpr").get<double>(), f.at("fnr").get<double>()});
        const auto& s = j.at("summary");
        auto ms = [](const nlohmann::ordered_json& v) {
            return MeanSd{v.at("mean").get<double>(), v.at("sd").get<double>()};
        };
        r.summary = {s.at("folds").get<std::size_t>(), ms(s.at("dice")), ms(s.at("iou")), ms(s.at("fpr")),
                     ms(s.at("fnr"))};
        for (const auto& b : j.at("size_bins"))
            r.size_bins.push_back({b.at("label").get<std::string>(), b.at("n").get<std::size_t>(),
                                   detail::opt_from(b.at("dice")), detail::opt_from(b.at("iou")),
                                   detail::opt_from(b.at("fpr")), detail::opt_from(b.at("fnr"))});
        for (const auto& t : j.at("paired_tests")) {
            PairedTestEntry e{t.at("metric").get<std::string>(), t.at("comparison").get<std::string>(),
                              std::nullopt};
            if (t.at("defined").get<bool>())
                e.result = PairedTestResult{t.at("W").get<double>(), t.at("W_plus").get<double>(),
                                            t.at("W_minus").get<double>(), t.at("p").get<double>(),
                                            t.at("r_rb").get<double>(), t.at("n").get<std::size_t>(),
                                            t.at("exact").get<bool>()};
            r.paired_tests.push_back(std::move(e));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed report: ") + e.what());
    }
}

inline std::string report_csv(const EvalReport& r)
{
    std::string out = "fold,image_id,dice,iou,fpr,fnr,tumor_length_px,size_bin,pass1_dice,pass1_iou,pass1_fpr,pass1_fnr\n";
    char buf[512];
    for (std::size_t i = 0; i < r.per_image.size(); ++i) {
        const auto& m = r.per_image[i];
        const auto& b = r.baseline[i];
        std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%.17g,%.17g,%zu,%s,%.17g,%.17g,%.17g,%.17g\n", m.fold,
                      m.image_id.c_str(), m.dice, m.iou, m.fpr, m.fnr, m.tumor_length_px,
                      kSizeBinLabels[static_cast<std::size_t>(size_bin(m.tumor_length_px))], b.dice, b.iou, b.fpr,
                      b.fnr);
        out += buf;
    }
    return out;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f || !(f << text) || !f.flush())
        throw Error("cannot write '" + path.string() + "'");
}

} // namespace detail

/// Writes <dir>/report.json and <dir>/report.csv.
inline void write_report(const std::filesystem::path& dir, const EvalReport& r)
{
    detail::write_text(dir / "report.json", to_json(r).dump(2) + "\n");
    detail::write_text(dir / "report.csv", report_csv(r));
}

inline EvalReport read_report(const std::filesystem::path& json_path)
{
    std::ifstream f(json_path);
    if (!f)
        throw Error("cannot open '" + json_path.string() + "'");
    nlohmann::ordered_json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("'" + json_path.string() + "' is not valid JSON: " + e.what());
    }
    return report_from_json(j);
}

} // namespace xbus::eval
