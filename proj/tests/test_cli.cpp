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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "xbus/cli/app.hpp"

using namespace xbus;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run xbusnet(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cli::run(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// One shared workspace: a small dataset and a fold-0 checkpoint trained for
// a handful of steps. Built once for the whole suite.
class CliTest : public ::testing::Test {
protected:
    static inline fs::path root;

    static void SetUpTestSuite()
    {
        root = fs::temp_directory_path() / "xbus_cli_suite";
        fs::remove_all(root);
        fs::create_directories(root);
        ASSERT_EQ(xbusnet({"synth", "--out", (root / "ds").string(), "--count", "20", "--seed", "5"}).code, 0);
        const auto r = xbusnet({"train", "--data", (root / "ds").string(), "--fold", "0", "--out",
                                (root / "ck" / "f0.bin").string(), "--iterations", "3", "--log-every", "0"});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    static void TearDownTestSuite() { fs::remove_all(root); }

    static std::string ds() { return (root / "ds").string(); }
    static std::string ck() { return (root / "ck" / "f0.bin").string(); }
    static std::string first_row()
    {
        std::istringstream in(slurp(root / "ds" / "metadata.csv"));
        std::string header, row;
        std::getline(in, header);
        std::getline(in, row);
        return row;
    }
    static std::string first_image() { return (root / "ds" / "images" / "phantom_0000.png").string(); }
};

} // namespace

TEST_F(CliTest, SynthWritesTriplesDeterministically)
{
    const auto a = root / "s1", b = root / "s2";
    ASSERT_EQ(xbusnet({"synth", "--out", a.string(), "--count", "6", "--seed", "3"}).code, 0);
    ASSERT_EQ(xbusnet({"synth", "--out", b.string(), "--count", "6", "--seed", "3"}).code, 0);
    const auto loaded = data::load_dataset(a.string());
    EXPECT_EQ(loaded.samples.size(), 6u);
    EXPECT_EQ(slurp(a / "metadata.csv"), slurp(b / "metadata.csv"));
    for (const auto* dir : {"images", "masks"})
        EXPECT_EQ(slurp(a / dir / "phantom_0005.png"), slurp(b / dir / "phantom_0005.png"));
}

TEST_F(CliTest, SynthZeroCountWarnsAndIsValid)
{
    const auto r = xbusnet({"synth", "--out", (root / "empty").string(), "--count", "0"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    EXPECT_TRUE(data::load_dataset((root / "empty").string()).samples.empty());
}

TEST_F(CliTest, TrainWritesManifestAndTrace)
{
    const auto manifest = slurp(manifest_path(ck()));
    EXPECT_NE(manifest.find("gfe.vit.pos_embed\t[1,65,128]\tfrozen"), std::string::npos);
    EXPECT_NE(manifest.find("\ttrainable"), std::string::npos);
    EXPECT_NE(manifest.find("#size_bins.t1="), std::string::npos);
    EXPECT_NE(manifest.find("#fold.index=0"), std::string::npos);
    std::istringstream trace(slurp(ck() + ".trace.csv"));
    std::string line;
    std::size_t rows = 0;
    std::getline(trace, line);
    EXPECT_EQ(line, "iteration,loss");
    while (std::getline(trace, line)) {
        ++rows;
        EXPECT_TRUE(std::isfinite(std::stod(line.substr(line.find(',') + 1))));
    }
    EXPECT_EQ(rows, 3u);
    // Model weights reload; the fold keys do not disturb the model config.
    EXPECT_NO_THROW(model::load_network(load_checkpoint(ck())));
}

TEST_F(CliTest, TrainUsageErrors)
{
    EXPECT_EQ(xbusnet({"train", "--data", ds(), "--out", (root / "x.bin").string()}).code, 2);
    EXPECT_EQ(xbusnet({"train", "--data", ds(), "--fold", "5", "--out", (root / "x.bin").string()}).code, 2);
    EXPECT_EQ(xbusnet({"train", "--data", (root / "nowhere").string(), "--fold", "0", "--out",
                       (root / "x.bin").string()})
                  .code,
              2);
    std::ofstream(root / "bad.cfg") << "train.no_such_key=1\n";
    const auto r = xbusnet({"train", "--config", (root / "bad.cfg").string(), "--fold", "0"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("no_such_key"), std::string::npos);
}

TEST_F(CliTest, TrainConfigRunKeysAndFlagOverride)
{
    const auto out = root / "cfg" / "f1.bin";
    std::ofstream(root / "run.cfg") << "run.data=" << ds() << "\nrun.checkpoint=" << out.string()
                                    << "\ntrain.iterations=50\ntrain.seed=11\n";
    const auto r = xbusnet({"train", "--config", (root / "run.cfg").string(), "--fold", "1", "--iterations", "2",
                            "--log-every", "0"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto meta = load_checkpoint(out.string()).metadata;
    EXPECT_EQ(meta.at("train.iterations"), "2");
    EXPECT_EQ(meta.at("train.seed"), "11");
    EXPECT_EQ(meta.at("fold.index"), "1");
}

TEST_F(CliTest, NonFiniteLossExitsThree)
{
    std::ofstream(root / "nan.cfg") << "train.base_lr=1e300\n";
    const auto r = xbusnet({"train", "--config", (root / "nan.cfg").string(), "--data", ds(), "--fold", "0", "--out",
                            (root / "nan.bin").string(), "--iterations", "5", "--log-every", "0"});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("non-finite"), std::string::npos);
}

TEST_F(CliTest, EvalReportIsCompleteAndDeterministic)
{
    const auto rep = root / "rep";
    const std::vector<std::string> args{"eval", "--ckpt", (root / "ck" / "f{fold}.bin").string(), "--data", ds(),
                                        "--report", rep.string(), "--folds", "0"};
    const auto r = xbusnet(args);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto first = slurp(rep / "report.json");
    const auto report = eval::read_report((rep / "report.json").string());
    EXPECT_EQ(report.tau_seg, 0.5);
    EXPECT_EQ(report.tau_proposal, 0.3);
    EXPECT_EQ(report.per_image.size(), 4u);
    EXPECT_EQ(report.folds.size(), 1u);
    EXPECT_EQ(report.config.at("data"), ds());
    for (const auto& m : report.per_image)
        EXPECT_TRUE(fs::exists(rep / "overlays" / (m.image_id + "_overlay.png")));
    ASSERT_EQ(xbusnet(args).code, 0);
    EXPECT_EQ(slurp(rep / "report.json"), first);
}

TEST_F(CliTest, EvalMissingInputsExitTwo)
{
    EXPECT_EQ(xbusnet({"eval", "--ckpt", (root / "none.bin").string(), "--data", ds(), "--report",
                       (root / "r").string()})
                  .code,
              2);
    // Fold 1 has no checkpoint under this pattern.
    const auto r = xbusnet({"eval", "--ckpt", (root / "ck" / "f{fold}.bin").string(), "--data", ds(), "--report",
                            (root / "r").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(fs::exists(root / "r" / "report.json"));
    EXPECT_EQ(xbusnet({"eval", "--ckpt", ck(), "--data", ds()}).code, 2);
}

TEST_F(CliTest, PredictWritesBinaryMaskAndDiagnostics)
{
    const auto out = root / "pred.png";
    const auto r = xbusnet({"predict", "--ckpt", ck(), "--image", first_image(), "--meta-row", first_row(), "--out",
                            out.string(), "--diagnostics", (root / "pred.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::size_t h = 0, w = 0;
    for (const auto v : data::read_gray8(out.string(), h, w))
        EXPECT_TRUE(v == 0 || v == 255);
    EXPECT_EQ(h, 64u);
    EXPECT_TRUE(fs::exists(out.string() + ".proposal.png"));
    const auto diag = nlohmann::json::parse(slurp(root / "pred.json"));
    EXPECT_EQ(diag.at("pass1_global_prompt").get<std::string>().find("unknown location") != std::string::npos, true);
    EXPECT_TRUE(diag.contains("pass2_global_prompt"));
    EXPECT_TRUE(diag.contains("local_prompt"));
    EXPECT_TRUE(diag.contains("fallback"));
}

TEST_F(CliTest, PredictRejectsBadInputs)
{
    EXPECT_EQ(xbusnet({"predict", "--ckpt", ck(), "--image", (root / "no.png").string(), "--meta-row", first_row(),
                       "--out", (root / "p.png").string()})
                  .code,
              2);
    EXPECT_EQ(xbusnet({"predict", "--ckpt", ck(), "--image", first_image(), "--meta-row", "a,b,c", "--out",
                       (root / "p.png").string()})
                  .code,
              2);
}

TEST_F(CliTest, GradcamMatchesInputDims)
{
    const auto out = root / "cam.png";
    const auto r = xbusnet({"gradcam", "--ckpt", ck(), "--image", first_image(), "--meta-row", first_row(), "--out",
                            out.string(), "--overlay", (root / "cam_overlay.png").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("F_fused"), std::string::npos);
    std::size_t h = 0, w = 0;
    data::read_gray8(out.string(), h, w);
    EXPECT_EQ(h, 64u);
    EXPECT_EQ(w, 64u);
    const auto overlay = data::read_rgb((root / "cam_overlay.png").string());
    EXPECT_EQ(overlay.height, 64u);
}

TEST_F(CliTest, GradcamUnknownLayerListsNames)
{
    const auto r = xbusnet({"gradcam", "--ckpt", ck(), "--image", first_image(), "--meta-row", first_row(),
                            "--layer", "nope", "--out", (root / "c.png").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("F_fused"), std::string::npos);
    EXPECT_NE(r.err.find("F_cat"), std::string::npos);
}

TEST(Cli, UsageErrorsAndHelp)
{
    EXPECT_EQ(xbusnet({}).code, 2);
    EXPECT_EQ(xbusnet({"frobnicate"}).code, 2);
    EXPECT_EQ(xbusnet({"synth"}).code, 2);
    EXPECT_EQ(xbusnet({"synth", "--out", "x", "--count", "many"}).code, 2);
    const auto h = xbusnet({"--help"});
    EXPECT_EQ(h.code, 0);
    EXPECT_NE(h.out.find("gradcam"), std::string::npos);
}

TEST(Cli, ReplaceFoldAndFoldList)
{
    EXPECT_EQ(cli::replace_fold("ck/f{fold}/{fold}.bin", 3), "ck/f3/3.bin");
    EXPECT_EQ(cli::parse_fold_list("all", 3), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(cli::parse_fold_list("2,0", 3), (std::vector<std::size_t>{2, 0}));
    EXPECT_THROW(cli::parse_fold_list("4", 3), UsageError);
}
