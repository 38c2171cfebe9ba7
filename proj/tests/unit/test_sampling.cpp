#include "gvk/data/sampling.hpp"

#include <map>
#include <set>

#include "test_util.hpp"

namespace gvk {
namespace {

Manifest eval_manifest(const std::string& dataset, std::size_t count, Domain domain = Domain::indoor) {
    Manifest m;
    for (std::size_t i = 0; i < count; ++i) {
        m.entries.push_back({dataset + "_" + std::to_string(i), "x.png", "x.gvkd", {1000, 1000, 8, 8}, domain, dataset,
                             Split::eval});
    }
    return m;
}

// 16x16 depth whose value encodes the pixel, with every 4th pixel invalid.
DepthMap coded_depth(const Sample&) {
    std::vector<float> v(256);
    std::vector<std::uint8_t> mask(256);
    for (std::size_t i = 0; i < 256; ++i) {
        v[i] = 1.0f + static_cast<float>(i);
        mask[i] = i % 4 == 0 ? 0 : 1;
    }
    return DepthMap(Tensor({16, 16}, v), mask);
}

TEST(Sampling, ThousandImagesTimesTenIsTenThousand) {
    const auto m = eval_manifest("nyu", 1000);
    const auto r = sample_eval_pixels(m, {10, 1000, 7}, coded_depth);
    EXPECT_EQ(r.queries.size(), 10000u);
    EXPECT_EQ(r.shortfall_count(), 0u);
    std::map<std::string, std::set<std::size_t>> per_image;
    for (const auto& q : r.queries) {
        const auto idx = q.v * 16 + q.u;
        EXPECT_NE(idx % 4, 0u) << "sampled an invalid pixel";
        EXPECT_EQ(q.gt_depth, 1.0 + idx);
        per_image[q.sample_id].insert(idx);
    }
    EXPECT_EQ(per_image.size(), 1000u);
    for (const auto& [id, pixels] : per_image) EXPECT_EQ(pixels.size(), 10u) << id;
}

TEST(Sampling, DeterministicAndIndependentOfOtherDatasets) {
    const auto a = eval_manifest("nyu", 20);
    auto ab = eval_manifest("kitti", 15, Domain::outdoor);
    ab.entries.insert(ab.entries.end(), a.entries.begin(), a.entries.end());
    const SamplingConfig cfg{5, 30, 99};
    const auto r1 = sample_eval_pixels(a, cfg, coded_depth);
    const auto r2 = sample_eval_pixels(a, cfg, coded_depth, 4);
    EXPECT_EQ(r1.queries, r2.queries);
    const auto r3 = sample_eval_pixels(ab, cfg, coded_depth);
    std::vector<PixelQuery> nyu_only;
    for (const auto& q : r3.queries)
        if (q.dataset == "nyu") nyu_only.push_back(q);
    EXPECT_EQ(nyu_only, r1.queries);
    EXPECT_NE(sample_eval_pixels(a, {5, 30, 100}, coded_depth).queries, r1.queries);
}

TEST(Sampling, OversampledImagesGetDisjointPixels) {
    const auto m = eval_manifest("tiny", 3);
    const auto r = sample_eval_pixels(m, {10, 12, 1}, coded_depth);
    EXPECT_EQ(r.queries.size(), 120u);
    std::map<std::string, std::multiset<std::size_t>> seen;
    for (const auto& q : r.queries) seen[q.sample_id].insert(q.v * 16 + q.u);
    std::size_t total = 0;
    for (const auto& [id, px] : seen) {
        EXPECT_EQ(std::set<std::size_t>(px.begin(), px.end()).size(), px.size()) << id;
        total += px.size();
    }
    EXPECT_EQ(total, 120u);
}

TEST(Sampling, ShortfallIsReportedNotPadded) {
    const auto m = eval_manifest("sparse", 2);
    auto few = [](const Sample& s) {
        std::vector<std::uint8_t> mask(16, 0);
        mask[0] = mask[5] = mask[9] = 1;
        if (s.id == "sparse_1") std::fill(mask.begin(), mask.end(), 1);
        return DepthMap(Tensor::full({4, 4}, 2.0f), mask);
    };
    const auto r = sample_eval_pixels(m, {5, 0, 3}, few);
    EXPECT_EQ(r.queries.size(), 5u);
    ASSERT_EQ(r.shortfalls.size(), 1u);
    EXPECT_EQ(r.shortfalls[0].sample_id, "sparse_0");
    EXPECT_EQ(r.shortfall_count(), 5u);
}

TEST(Sampling, OnlyEvalSplitIsUsed) {
    auto m = eval_manifest("nyu", 4);
    m.entries[0].split = Split::train;
    const auto r = sample_eval_pixels(m, {2, 0, 1}, coded_depth);
    EXPECT_EQ(r.queries.size(), 6u);
    for (const auto& q : r.queries) EXPECT_NE(q.sample_id, "nyu_0");
    EXPECT_THROW(sample_eval_pixels(m, {0, 0, 1}, coded_depth), Error);
}

TEST(Rng, ReferenceValues) {
    // splitmix64 reference outputs for seed 1234567
    std::uint64_t s = 1234567;
    EXPECT_EQ(splitmix64(s), 6457827717110365317ULL);
    EXPECT_EQ(splitmix64(s), 3203168211198807973ULL);
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    std::uint64_t t = 5;
    for (int i = 0; i < 1000; ++i) ASSERT_LT(draw_below(t, 7), 7u);
    EXPECT_THROW(draw_below(t, 0), Error);
}

}  // namespace
}  // namespace gvk
