#include "gvk/head/depth_head.hpp"

#include <cmath>

#include "gvk/tensor/init.hpp"
#include "gvk/tensor/ops.hpp"

namespace gvk {

std::string to_string(HeadVariant v) {
    switch (v) {
        case HeadVariant::lightweight_dpt: return "lightweight_dpt";
        case HeadVariant::original_dpt: return "original_dpt";
        case HeadVariant::mlp2: return "mlp2";
        case HeadVariant::mlp2_multiscale: return "mlp2_multiscale";
    }
    return "unknown";
}

HeadVariant parse_head_variant(const std::string& s) {
    for (auto v : {HeadVariant::lightweight_dpt, HeadVariant::original_dpt, HeadVariant::mlp2,
                   HeadVariant::mlp2_multiscale}) {
        if (to_string(v) == s) return v;
    }
    throw Error("unknown head variant: " + s);
}

DepthHeadConfig DepthHeadConfig::for_variant(HeadVariant variant) {
    DepthHeadConfig c;
    c.variant = variant;
    if (variant == HeadVariant::original_dpt) c.level_scales = {4.0, 2.0, 1.0, 0.5};
    return c;
}

void DepthHeadConfig::validate() const {
    if (fusion_channels == 0) throw Error("head: fusion_channels must be > 0");
    if (output_hidden == 0) throw Error("head: output_hidden must be > 0");
    for (std::size_t k = 0; k < 4; ++k) {
        if (!(level_scales[k] > 0.0)) throw Error("head: level scales must be positive");
        if (k > 0 && !(level_scales[k] < level_scales[k - 1])) throw Error("head: level scales must strictly decrease");
    }
}

FeatureBundle reassemble(const HiddenStates& states) {
    states.validate();
    FeatureBundle bundle;
    bundle.grid_h = states.llm_image.grid_h;
    bundle.grid_w = states.llm_image.grid_w;
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& grid = k < 3 ? states.vit_taps[k] : states.llm_image;
        bundle.levels[k] = ops::reshape(ops::transpose(grid.tokens), {grid.dim(), grid.grid_h, grid.grid_w});
    }
    return bundle;
}

Tensor flatten_level(const Tensor& level) {
    if (level.rank() != 3) throw ShapeError("flatten_level: expected [d,h,w], got " + shape_str(level.shape()));
    return ops::transpose(ops::reshape(level, {level.dim(0), level.dim(1) * level.dim(2)}));
}

DepthHead::DepthHead(const DepthHeadConfig& config, std::size_t in_dim, ParameterStore& store)
    : config_(config), in_dim_(in_dim), rng_(config.seed) {
    config_.validate();
    const auto c = config_.fusion_channels;
    const bool dpt = config_.variant == HeadVariant::lightweight_dpt || config_.variant == HeadVariant::original_dpt;
    for (std::size_t k = 0; k < 4; ++k) {
        const bool used = config_.variant != HeadVariant::mlp2 || k == 3;
        if (!used) continue;
        norm_g_[k] = store.add("head.norm" + std::to_string(k + 1) + ".gain", Tensor::full({in_dim}, 1.0f));
        norm_b_[k] = store.add("head.norm" + std::to_string(k + 1) + ".bias", Tensor::zeros({in_dim}));
    }
    if (dpt) {
        for (std::size_t k = 0; k < 4; ++k) {
            project_[k] = make_conv(store, "head.project" + std::to_string(k + 1), in_dim, c, 1, 1.0f);
        }
        for (std::size_t k = 0; k < 3; ++k) {
            const auto name = "head.fuse" + std::to_string(k + 2);
            refine_[k][0] = make_rcu(store, name + ".rcu1");
            refine_[k][1] = make_rcu(store, name + ".rcu2");
            skip_[k] = make_rcu(store, "head.skip" + std::to_string(k + 1));
        }
        const auto half = std::max<std::size_t>(c / 2, 1);
        out1_ = make_conv(store, "head.out.conv1", c, half, 3, 1.0f);
        out2_ = make_conv(store, "head.out.conv2", half, config_.output_hidden, 3, 1.0f);
        out3_ = make_conv(store, "head.out.conv3", config_.output_hidden, 1, 1, 0.5f);
    } else {
        const auto mlp_in = config_.variant == HeadVariant::mlp2 ? in_dim : 4 * in_dim;
        mlp1_ = make_conv(store, "head.mlp.fc1", mlp_in, c, 1, 1.0f);
        mlp2_ = make_conv(store, "head.mlp.fc2", c, 1, 1, 0.5f);
    }
}

DepthHead::Conv DepthHead::make_conv(ParameterStore& store, const std::string& name, std::size_t cin,
                                     std::size_t cout, std::size_t k, float gain) {
    const auto fan_in = cin * k * k;
    Conv conv;
    conv.weight = store.add(name + ".weight", init::he_uniform({cout, cin, k, k}, fan_in, rng_, gain));
    conv.bias = store.add(name + ".bias", Tensor::zeros({cout}));
    return conv;
}

DepthHead::ResidualUnit DepthHead::make_rcu(ParameterStore& store, const std::string& name) {
    const auto c = config_.fusion_channels;
    return {make_conv(store, name + ".conv_a", c, c, 3, 1.0f), make_conv(store, name + ".conv_b", c, c, 3, 0.5f)};
}

Tensor DepthHead::apply(const Conv& c, const Tensor& x) const {
    const int pad = c.weight.dim(2) == 3 ? 1 : 0;
    return ops::conv2d(x, c.weight, c.bias, 1, pad);
}

Tensor DepthHead::apply(const ResidualUnit& r, const Tensor& x) const {
    auto y = apply(r.a, ops::relu(x));
    y = apply(r.b, ops::relu(y));
    return ops::add(x, y);
}

Tensor DepthHead::normalize_level(std::size_t k, const Tensor& level) const {
    const auto d = level.dim(0), h = level.dim(1), w = level.dim(2);
    if (d != in_dim_) {
        throw ShapeError("depth head expects " + std::to_string(in_dim_) + " channels, level " + std::to_string(k + 1) +
                         " has " + std::to_string(d));
    }
    auto tokens = ops::layer_norm(flatten_level(level), norm_g_[k], norm_b_[k]);
    return ops::reshape(ops::transpose(tokens), {d, h, w});
}

std::array<Tensor, 4> DepthHead::build_pyramid(const FeatureBundle& bundle) const {
    std::array<Tensor, 4> out;
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& lv = bundle.levels[k];
        if (lv.rank() != 3 || lv.dim(1) != bundle.grid_h || lv.dim(2) != bundle.grid_w) {
            throw ShapeError("build_pyramid: level " + std::to_string(k + 1) + " extent differs from the bundle grid");
        }
        auto projected = apply(project_[k], normalize_level(k, lv));
        const auto s = config_.level_scales[k];
        const auto h = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(bundle.grid_h * s)));
        const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(bundle.grid_w * s)));
        out[k] = ops::bilinear_resize(projected, h, w);
    }
    return out;
}

Tensor DepthHead::fuse_and_decode(const std::array<Tensor, 4>& levels, std::size_t input_h,
                                  std::size_t input_w) const {
    const auto c = config_.fusion_channels;
    for (std::size_t k = 0; k < 4; ++k) {
        if (levels[k].rank() != 3 || levels[k].dim(0) != c) {
            throw ShapeError("fuse_and_decode: level " + std::to_string(k + 1) + " has shape " +
                             shape_str(levels[k].shape()));
        }
        if (k > 0 && (levels[k].dim(1) > levels[k - 1].dim(1) || levels[k].dim(2) > levels[k - 1].dim(2))) {
            throw ShapeError("fuse_and_decode: level " + std::to_string(k + 1) + " is finer than level " +
                             std::to_string(k));
        }
    }
    if (input_h == 0 || input_w == 0) throw ShapeError("fuse_and_decode: empty output size");

    auto fused = levels[3];
    for (std::size_t k = 3; k-- > 0;) {
        fused = apply(refine_[k][1], apply(refine_[k][0], fused));
        fused = ops::bilinear_resize(fused, levels[k].dim(1), levels[k].dim(2));
        fused = ops::add(fused, apply(skip_[k], levels[k]));
    }
    auto y = apply(out1_, fused);
    y = ops::bilinear_resize(y, input_h, input_w);
    y = ops::relu(apply(out2_, y));
    y = ops::softplus(apply(out3_, y));
    return ops::reshape(y, {input_h, input_w});
}

Tensor DepthHead::decode(const FeatureBundle& bundle, std::size_t input_h, std::size_t input_w) const {
    ++invocations_;
    switch (config_.variant) {
        case HeadVariant::lightweight_dpt:
        case HeadVariant::original_dpt:
            return fuse_and_decode(build_pyramid(bundle), input_h, input_w);
        case HeadVariant::mlp2:
        case HeadVariant::mlp2_multiscale: {
            Tensor x;
            if (config_.variant == HeadVariant::mlp2) {
                x = normalize_level(3, bundle.levels[3]);
            } else {
                std::vector<Tensor> parts;
                for (std::size_t k = 0; k < 4; ++k) parts.push_back(normalize_level(k, bundle.levels[k]));
                x = ops::concat(parts);
            }
            auto y = apply(mlp2_, ops::relu(apply(mlp1_, x)));
            y = ops::softplus(ops::bilinear_resize(y, input_h, input_w));
            return ops::reshape(y, {input_h, input_w});
        }
    }
    throw Error("unreachable head variant");
}

}  // namespace gvk
