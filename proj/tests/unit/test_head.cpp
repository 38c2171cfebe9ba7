#include "gvk/head/model.hpp"
#include "gvk/loss/losses.hpp"
#include "gvk/tensor/checkpoint.hpp"
#include "gvk/tensor/ops.hpp"

#include "test_util.hpp"

namespace gvk {
namespace {

HiddenStates synthetic_states(std::size_t gh, std::size_t gw, std::size_t d, std::mt19937_64& rng) {
    HiddenStates s;
    for (std::size_t k = 0; k < 3; ++k) s.vit_taps[k] = {test::random_tensor({gh * gw, d}, rng), gh, gw};
    s.llm_image = {test::random_tensor({gh * gw, d}, rng), gh, gw};
    s.llm_text = Tensor::zeros({0, d});
    return s;
}

TEST(Reassemble, RowMajorTokenOrder) {
    HiddenStates s;
    // token t = (y, x) row-major, channel c holds 100*c + t
    const std::size_t gh = 2, gw = 3, d = 2;
    std::vector<float> v(gh * gw * d);
    for (std::size_t t = 0; t < gh * gw; ++t)
        for (std::size_t c = 0; c < d; ++c) v[t * d + c] = static_cast<float>(100 * c + t);
    for (auto& tap : s.vit_taps) tap = {Tensor({gh * gw, d}, v), gh, gw};
    s.llm_image = {Tensor({gh * gw, d}, v), gh, gw};
    const auto b = reassemble(s);
    ASSERT_EQ(b.levels[3].shape(), (Shape{2, 2, 3}));
    EXPECT_EQ(b.levels[3].at({0, 1, 2}), 5.0f);
    EXPECT_EQ(b.levels[3].at({1, 0, 1}), 101.0f);
    const auto back = flatten_level(b.levels[0]);
    EXPECT_EQ(std::vector<float>(back.data().begin(), back.data().end()), v);
}

TEST(Reassemble, RejectsInconsistentGrids) {
    std::mt19937_64 rng(1);
    auto s = synthetic_states(2, 3, 4, rng);
    s.vit_taps[1].grid_h = 3;
    s.vit_taps[1].grid_w = 2;
    EXPECT_THROW(reassemble(s), ShapeError);
}

TEST(DepthHead, PyramidSizes) {
    std::mt19937_64 rng(2);
    const auto s = synthetic_states(8, 8, 16, rng);
    DepthHeadConfig c;
    c.fusion_channels = 12;
    ParameterStore store;
    DepthHead head(c, 16, store);
    const auto p = head.build_pyramid(reassemble(s));
    const std::array<std::size_t, 4> sizes{64, 32, 16, 8};
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(p[k].shape(), (Shape{12, sizes[k], sizes[k]})) << k;

    ParameterStore store2;
    DepthHead orig(DepthHeadConfig::for_variant(HeadVariant::original_dpt), 16, store2);
    const auto q = orig.build_pyramid(reassemble(s));
    EXPECT_EQ(q[0].dim(1), 32u);
    EXPECT_EQ(q[3].dim(1), 4u);
}

TEST(DepthHead, ZeroFeaturesGiveZeroPyramidAndSoftplusOfBias) {
    HiddenStates s;
    for (auto& tap : s.vit_taps) tap = {Tensor::zeros({4 * 6, 8}), 4, 6};
    s.llm_image = {Tensor::zeros({4 * 6, 8}), 4, 6};
    DepthHeadConfig c;
    c.fusion_channels = 8;
    ParameterStore store;
    DepthHead head(c, 8, store);
    const auto p = head.build_pyramid(reassemble(s));
    for (const auto& level : p)
        for (float v : level.data()) ASSERT_EQ(v, 0.0f);
    // all biases start at zero, so the output is softplus(0) everywhere
    const auto depth = head.decode(reassemble(s), 64, 96);
    for (float v : depth.data()) ASSERT_NEAR(v, std::log(2.0), 1e-6);
}

TEST(DepthHead, OutputPositiveAndInputSized) {
    std::mt19937_64 rng(3);
    const auto s = synthetic_states(3, 5, 16, rng);
    for (auto variant : {HeadVariant::lightweight_dpt, HeadVariant::original_dpt, HeadVariant::mlp2,
                         HeadVariant::mlp2_multiscale}) {
        auto c = DepthHeadConfig::for_variant(variant);
        c.fusion_channels = 16;
        ParameterStore store;
        DepthHead head(c, 16, store);
        const auto depth = head.decode(reassemble(s), 48, 80);
        ASSERT_EQ(depth.shape(), (Shape{48, 80})) << to_string(variant);
        for (float v : depth.data()) ASSERT_TRUE(std::isfinite(v) && v > 0.0f) << to_string(variant);
        EXPECT_EQ(head.invocations(), 1u);
        EXPECT_EQ(parse_head_variant(to_string(variant)), variant);
    }
    EXPECT_THROW(parse_head_variant("dpt"), Error);
}

TEST(DepthHead, ChannelMismatchIsShapeError) {
    std::mt19937_64 rng(4);
    const auto s = synthetic_states(2, 2, 8, rng);
    ParameterStore store;
    DepthHead head(DepthHeadConfig{}, 16, store);
    EXPECT_THROW(head.decode(reassemble(s), 64, 64), ShapeError);
}

TEST(DepthVlm, OneForwardOneHeadCallWholeMap) {
    DepthVlm model(desk_model_config());
    std::mt19937_64 rng(5);
    const auto image = test::random_tensor({3, 32, 48}, rng, 0.0f, 1.0f);
    const auto out = model.forward(image, {{0, 2}, 2});
    EXPECT_EQ(out.depth.shape(), (Shape{32, 48}));
    EXPECT_EQ(out.text_logits.shape(), (Shape{2, 64}));
    EXPECT_EQ(model.forward_count(), 1u);
    EXPECT_EQ(model.head().invocations(), 1u);
}

TEST(DepthVlm, SilogGradientReachesHead) {
    DepthVlm model(desk_model_config());
    std::mt19937_64 rng(6);
    const auto image = test::random_tensor({3, 32, 32}, rng, 0.0f, 1.0f);
    const auto out = model.forward(image, {{0, 2}, 2});
    const DepthMap gt(test::random_tensor({32, 32}, rng, 1.0f, 4.0f));
    silog_loss(out.depth, gt, 0.5).backward();
    std::size_t head_params = 0, nonzero = 0, vit_nonzero = 0;
    for (const auto& p : model.parameters().all()) {
        const bool any = p.tensor.has_grad() &&
                         std::any_of(p.tensor.grad().begin(), p.tensor.grad().end(), [](float g) { return g != 0.0f; });
        if (p.name.rfind("head.", 0) == 0) {
            ++head_params;
            nonzero += any ? 1 : 0;
        }
        if (p.name.rfind("vit.", 0) == 0) vit_nonzero += any ? 1 : 0;
    }
    EXPECT_GT(head_params, 0u);
    EXPECT_GT(nonzero, head_params / 2);
    EXPECT_GT(vit_nonzero, 0u);
}

TEST(DepthVlm, DeskConfigValues) {
    const auto c = desk_model_config(HeadVariant::mlp2);
    EXPECT_EQ(c.encoder.token_stride(), 16u);
    EXPECT_EQ(c.head.fusion_channels, 32u);
    EXPECT_EQ(c.head.variant, HeadVariant::mlp2);
    const ModelConfig lib;
    EXPECT_EQ(lib.encoder.token_stride(), 32u);
    EXPECT_EQ(lib.head.fusion_channels, 128u);
}

TEST(DepthVlm, ImageToTensorLayout) {
    const std::vector<std::uint8_t> rgb{255, 0, 51, 0, 255, 102};
    const auto t = image_to_tensor(rgb, 1, 2);
    EXPECT_EQ(t.shape(), (Shape{3, 1, 2}));
    EXPECT_FLOAT_EQ(t.at({0, 0, 0}), 1.0f);
    EXPECT_FLOAT_EQ(t.at({1, 0, 1}), 1.0f);
    EXPECT_FLOAT_EQ(t.at({2, 0, 0}), 0.2f);
    EXPECT_THROW(image_to_tensor(rgb, 2, 2), ShapeError);
}

TEST(DepthFile, RoundTripWithMask) {
    std::vector<std::uint8_t> mask{1, 0, 1, 1, 0, 1, 1, 1, 1, 0, 0};
    const DepthMap d(Tensor({1, 11}, {1, 0, 3, 4, -1, 6, 7, 8, 9, 10, 11}), mask);
    const auto bytes = encode_depth(d);
    EXPECT_EQ(bytes.size(), 8u + 8 + 44 + 2);
    EXPECT_EQ(bytes[60], 0b11101101);
    EXPECT_EQ(bytes[61], 0b001);
    const auto back = decode_depth(bytes);
    EXPECT_EQ(back.valid, mask);
    EXPECT_EQ(encode_depth(back), bytes);
    auto cut = bytes;
    cut.pop_back();
    EXPECT_THROW(decode_depth(cut), FormatError);

    const auto dir = test::temp_dir("depth");
    write_depth(dir / "x.gvkd", d);
    EXPECT_EQ(encode_depth(read_depth(dir / "x.gvkd")), bytes);
}

TEST(DepthFile, Invariants) {
    DepthMap ok(Tensor({1, 2}, {1.0f, -5.0f}), {1, 0});
    EXPECT_NO_THROW(ok.check_invariants());
    EXPECT_EQ(ok.valid_count(), 1u);
    EXPECT_TRUE(ok.usable(0, 0));
    EXPECT_FALSE(ok.usable(0, 1));
    DepthMap bad(Tensor({1, 2}, {1.0f, 0.0f}));
    EXPECT_THROW(bad.check_invariants(), Error);
    EXPECT_THROW(DepthMap(Tensor({3}, {1, 2, 3})), ShapeError);
}

}  // namespace
}  // namespace gvk
