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
#include <set>

#include "xbus/prompt/text_encoder.hpp"
#include "oracles.hpp"

using namespace xbus;
using namespace xbus::prompt;

namespace {

const char* kHeader = "image_id,image_path,mask_path,size,shape,margin,birads\n";

std::vector<std::string> all_template_outputs()
{
    std::vector<std::string> out;
    for (auto s : {SizeCategory::small, SizeCategory::medium, SizeCategory::large}) {
        out.push_back(verbalize_global(s, std::nullopt));
        for (auto q : {Quadrant::upper_inner, Quadrant::upper_outer, Quadrant::lower_inner,
                       Quadrant::lower_outer})
            out.push_back(verbalize_global(s, q));
    }
    for (std::size_t a = 0; a < kShapeNames.size(); ++a)
        for (std::size_t b = 0; b < kMarginNames.size(); ++b)
            for (std::size_t c = 0; c < kBiradsNames.size(); ++c)
                out.push_back(verbalize_local(static_cast<LesionShape>(a), static_cast<Margin>(b),
                                              static_cast<Birads>(c)));
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// metadata CSV

TEST(MetadataCsv, ParsesValidRow)
{
    const auto t = parse_metadata_csv_text(std::string(kHeader)
                                           + "img1,i.png,m.png,12.0,irregular,microlobulated,4\n");
    ASSERT_EQ(t.records.size(), 1u);
    const auto& r = t.records[0];
    EXPECT_EQ(r.image_id, "img1");
    EXPECT_EQ(r.size_value, 12.0);
    EXPECT_EQ(r.shape, LesionShape::irregular);
    EXPECT_EQ(r.margin, Margin::microlobulated);
    EXPECT_EQ(r.birads, Birads::b4);
    EXPECT_EQ(verbalize_local(r), "irregular shape, microlobulated margin, BI-RADS 4");
}

TEST(MetadataCsv, RejectsUnknownShapeWithRowAndColumn)
{
    try {
        parse_metadata_csv_text(std::string(kHeader) + "a,i,m,3,oval,angular,3\n"
                                + "b,i,m,3,blobby,angular,3\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.row(), 3u);
        EXPECT_EQ(e.column(), "shape");
    }
}

TEST(MetadataCsv, RejectsNonPositiveSizeAndMissingColumn)
{
    EXPECT_THROW(parse_metadata_csv_text(std::string(kHeader) + "a,i,m,0,oval,angular,3\n"), ParseError);
    EXPECT_THROW(parse_metadata_csv_text(std::string(kHeader) + "a,i,m,-2,oval,angular,3\n"), ParseError);
    EXPECT_THROW(parse_metadata_csv_text(std::string(kHeader) + "a,i,m,x,oval,angular,3\n"), ParseError);
    EXPECT_THROW(parse_metadata_csv_text("image_id,image_path,size,shape,margin,birads\n"), ParseError);
    EXPECT_THROW(parse_metadata_csv_text(std::string(kHeader) + "a,i,m,1,oval,angular,7\n"), ParseError);
}

TEST(MetadataCsv, EmptyFileGivesEmptyListAndWarning)
{
    const auto t = parse_metadata_csv_text("");
    EXPECT_TRUE(t.records.empty());
    EXPECT_EQ(t.warnings.size(), 1u);
}

TEST(MetadataCsv, MultiLesionImagesExcluded)
{
    const auto t = parse_metadata_csv_text(std::string(kHeader) + "a,i,m,3,oval,angular,3\n"
                                           + "b,i,m,4,round,circumscribed,2\n"
                                           + "a,i,m,5,oval,indistinct,4a\n");
    ASSERT_EQ(t.records.size(), 1u);
    EXPECT_EQ(t.records[0].image_id, "b");
    EXPECT_EQ(t.warnings.size(), 1u);
}

TEST(MetadataCsv, RoundTripsThroughWriter)
{
    LesionMetadata m{"p_1", "images/p_1.png", "masks/p_1.png", 37.25, LesionShape::oval,
                     Margin::spiculated, Birads::b4c};
    const auto t = parse_metadata_csv_text(metadata_csv_header() + metadata_csv_row(m));
    ASSERT_EQ(t.records.size(), 1u);
    EXPECT_EQ(t.records[0], m);
}

TEST(MetadataCsv, EnumsAreCaseAndSpaceInsensitive)
{
    EXPECT_EQ(parse_shape(" Irregular "), LesionShape::irregular);
    EXPECT_EQ(parse_birads("4B"), Birads::b4b);
    EXPECT_FALSE(parse_margin("smooth").has_value());
}

// ---------------------------------------------------------------------------
// size bins

TEST(SizeBins, MatchesLinearInterpolationOracle)
{
    const std::vector<double> v{1, 2, 3, 4, 5, 6};
    const auto b = fit_size_bins(v);
    EXPECT_NEAR(b.t1, xbus::testing::quantile_type7(v, 1.0 / 3.0), 1e-12);
    EXPECT_NEAR(b.t2, xbus::testing::quantile_type7(v, 2.0 / 3.0), 1e-12);
    EXPECT_NEAR(b.t1, 2.6667, 1e-4);
    EXPECT_NEAR(b.t2, 4.3333, 1e-4);
}

TEST(SizeBins, RandomListsMatchOracle)
{
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(rng.uniform_int(3, 42)));
        for (double& x : v)
            x = rng.uniform(1.0, 300.0);
        const auto b = fit_size_bins(v);
        EXPECT_NEAR(b.t1, xbus::testing::quantile_type7(v, 1.0 / 3.0), 1e-9);
        EXPECT_NEAR(b.t2, xbus::testing::quantile_type7(v, 2.0 / 3.0), 1e-9);
        EXPECT_LE(b.t1, b.t2);
    }
}

TEST(SizeBins, DegenerateAndThreeValues)
{
    const auto c = fit_size_bins({5, 5, 5, 5});
    EXPECT_EQ(c.t1, 5.0);
    EXPECT_EQ(c.t2, 5.0);
    const auto b = fit_size_bins({30, 10, 20});
    EXPECT_GE(b.t1, 10.0);
    EXPECT_LE(b.t1, 20.0);
    EXPECT_GE(b.t2, 20.0);
    EXPECT_LE(b.t2, 30.0);
    EXPECT_THROW(fit_size_bins({1, 2}), ConfigError);
}

TEST(SizeBins, DiscretizeBoundaries)
{
    const SizeBins b{10.0, 20.0};
    EXPECT_EQ(discretize_size(10.0, b), SizeCategory::small);
    EXPECT_EQ(discretize_size(0.5, b), SizeCategory::small);
    EXPECT_EQ(discretize_size(10.5, b), SizeCategory::medium);
    EXPECT_EQ(discretize_size(20.0, b), SizeCategory::medium);
    EXPECT_EQ(discretize_size(1e6, b), SizeCategory::large);
}

TEST(SizeBins, ValidationSentinelDoesNotMoveBins)
{
    std::vector<LesionMetadata> rows;
    for (int i = 0; i < 30; ++i)
        rows.push_back({"r" + std::to_string(i), "", "", 10.0 + i, LesionShape::oval,
                        Margin::circumscribed, Birads::b2});
    std::vector<std::size_t> train, val;
    for (std::size_t i = 0; i < rows.size(); ++i)
        (i % 5 == 0 ? val : train).push_back(i);
    const auto before = fit_size_bins(rows, train);
    for (auto i : val)
        rows[i].size_value = 1e12;
    const auto after = fit_size_bins(rows, train);
    EXPECT_EQ(before.t1, after.t1);
    EXPECT_EQ(before.t2, after.t2);
}

// ---------------------------------------------------------------------------
// centroid and quadrant

TEST(Centroid, SimpleCases)
{
    Mask full(4, 4, 1);
    const auto c = centroid_from_mask(full);
    EXPECT_EQ(c.cx, 1.5);
    EXPECT_EQ(c.cy, 1.5);

    Mask one(5, 5);
    one.at(3, 2) = 1;
    const auto d = centroid_from_mask(one);
    EXPECT_EQ(d.cx, 2.0);
    EXPECT_EQ(d.cy, 3.0);

    Mask tri(3, 3);
    tri.at(0, 0) = tri.at(0, 1) = tri.at(1, 0) = 1;
    const auto e = centroid_from_mask(tri);
    EXPECT_NEAR(e.cx, 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(e.cy, 1.0 / 3.0, 1e-15);

    EXPECT_THROW(centroid_from_mask(Mask(3, 3)), EmptyMaskError);
}

TEST(Centroid, EqualsMeanOfCoordinatesOnRandomMasks)
{
    Rng rng(77);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t h = static_cast<std::size_t>(rng.uniform_int(1, 20)), w = static_cast<std::size_t>(rng.uniform_int(1, 20));
        Mask m(h, w);
        std::vector<std::pair<double, double>> pts;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                if (rng.uniform() < 0.3) {
                    m.at(y, x) = 1;
                    pts.emplace_back(static_cast<double>(x), static_cast<double>(y));
                }
        if (pts.empty())
            continue;
        double sx = 0, sy = 0;
        for (auto [x, y] : pts) {
            sx += x;
            sy += y;
        }
        const auto c = centroid_from_mask(m);
        EXPECT_NEAR(c.cx, sx / static_cast<double>(pts.size()), 1e-12);
        EXPECT_NEAR(c.cy, sy / static_cast<double>(pts.size()), 1e-12);
        EXPECT_GE(c.cx, 0.0);
        EXPECT_LT(c.cx, static_cast<double>(w));
    }
}

TEST(Quadrant, Convention)
{
    EXPECT_EQ(quadrant_of({50, 100}, 352, 352), Quadrant::upper_inner);
    EXPECT_EQ(quadrant_of({300, 300}, 352, 352), Quadrant::lower_outer);
    EXPECT_EQ(quadrant_of({10, 176}, 352, 352), Quadrant::lower_inner);
    EXPECT_EQ(quadrant_of({176, 10}, 352, 352), Quadrant::upper_outer);
}

// ---------------------------------------------------------------------------
// templates and tokenizer

TEST(Templates, Instantiation)
{
    EXPECT_EQ(verbalize_global(SizeCategory::small, Quadrant::upper_outer),
              "a small lesion in the upper outer quadrant of the breast");
    EXPECT_EQ(verbalize_global(SizeCategory::large, std::nullopt),
              "a large lesion at an unknown location in the breast");
    EXPECT_EQ(verbalize_local(LesionShape::oval, Margin::circumscribed, Birads::b2),
              "oval shape, circumscribed margin, BI-RADS 2");
    EXPECT_EQ(verbalize_global(SizeCategory::medium, Quadrant::lower_inner),
              verbalize_global(SizeCategory::medium, Quadrant::lower_inner));
}

TEST(Tokenizer, EmptyTextIsAllPad)
{
    const Vocabulary v;
    const auto t = tokenize("", v, 16);
    EXPECT_EQ(t.ids, std::vector<std::size_t>(16, kPadId));
}

TEST(Tokenizer, UnknownWordsCountedAndWarned)
{
    const Vocabulary v;
    const auto t = tokenize("a fuzzy lesion", v, 16);
    EXPECT_EQ(t.ids[1], kUnknownId);
    EXPECT_EQ(t.unknown_count, 1u);
    EXPECT_EQ(t.warnings.size(), 1u);
}

TEST(Tokenizer, EveryTemplateHasNoUnknownsAndFits)
{
    const Vocabulary v;
    for (const auto& s : all_template_outputs()) {
        EXPECT_LE(split_words(s).size(), 16u) << s;
        const auto t = tokenize(s, v, 16);
        EXPECT_EQ(t.unknown_count, 0u) << s;
        for (auto id : t.ids)
            EXPECT_LT(id, v.size());
    }
}

TEST(Tokenizer, InjectiveOnTemplateSet)
{
    const Vocabulary v;
    std::set<std::vector<std::size_t>> seen;
    const auto outs = all_template_outputs();
    for (const auto& s : outs)
        seen.insert(tokenize(s, v, 16).ids);
    EXPECT_EQ(seen.size(), outs.size());
}

TEST(Tokenizer, VocabularyFileListsEveryToken)
{
    const Vocabulary v;
    const auto path = std::filesystem::temp_directory_path() / "xbus_vocab_test.txt";
    v.write(path.string());
    std::ifstream in(path);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const auto tab = line.find('\t');
        ASSERT_NE(tab, std::string::npos);
        EXPECT_EQ(v.id(line.substr(0, tab)), std::stoul(line.substr(tab + 1)));
        ++n;
    }
    EXPECT_EQ(n, v.size());
    std::filesystem::remove(path);
}

// ---------------------------------------------------------------------------
// text encoder

TEST(TextEncoder, EmbeddingsDistinctDeterministicAndFixedLength)
{
    ParameterList params;
    const TextEncoder enc(nn::ParamBuilder(params, 2024, "text"));
    std::set<std::vector<double>> seen;
    const auto outs = all_template_outputs();
    for (const auto& s : outs) {
        const auto e = enc.encode_text(s);
        ASSERT_EQ(e.size(), 64u);
        EXPECT_EQ(e, enc.encode_text(s));
        seen.insert(e);
    }
    EXPECT_EQ(seen.size(), outs.size());
}

TEST(TextEncoder, SameSeedSameEmbeddings)
{
    ParameterList a, b;
    const TextEncoder ea(nn::ParamBuilder(a, 9, "text"));
    const TextEncoder eb(nn::ParamBuilder(b, 9, "text"));
    const auto s = verbalize_local(LesionShape::round, Margin::angular, Birads::b3);
    EXPECT_EQ(ea.encode_text(s), eb.encode_text(s));
}

TEST(TextEncoder, ParametersFrozenAndLengthChecked)
{
    ParameterList params;
    const TextEncoder enc(nn::ParamBuilder(params, 1, "text"));
    ASSERT_FALSE(params.empty());
    for (const auto& p : params) {
        EXPECT_TRUE(p.frozen) << p.name;
        EXPECT_FALSE(p.tensor.requires_grad()) << p.name;
    }
    TokenSequence short_seq;
    short_seq.ids.assign(5, kPadId);
    EXPECT_THROW(enc.encode(short_seq), ShapeError);
}

TEST(TextEncoder, PromptPairCarriesBothTexts)
{
    ParameterList params;
    const TextEncoder enc(nn::ParamBuilder(params, 3, "text"));
    const auto p = make_prompts(enc, verbalize_global(SizeCategory::small, std::nullopt),
                                verbalize_local(LesionShape::oval, Margin::circumscribed, Birads::b2));
    EXPECT_EQ(p.global_embedding.size(), p.local_embedding.size());
    EXPECT_NE(p.global_embedding, p.local_embedding);
}
