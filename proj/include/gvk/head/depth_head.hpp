#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <string>

#include "gvk/encoder/encoder.hpp"
#include "gvk/tensor/optim.hpp"

namespace gvk {

enum class HeadVariant { lightweight_dpt, original_dpt, mlp2, mlp2_multiscale };

std::string to_string(HeadVariant v);
HeadVariant parse_head_variant(const std::string& s);

struct DepthHeadConfig {
    std::size_t fusion_channels = 128;
    /// Resize factor of each level relative to the token grid, F1 first.
    std::array<double, 4> level_scales{8.0, 4.0, 2.0, 1.0};
    /// Input pixels per token; used when the input size is not otherwise known.
    std::size_t output_scale = 32;
    std::size_t output_hidden = 32;
    HeadVariant variant = HeadVariant::lightweight_dpt;
    std::uint64_t seed = 1;

    /// Defaults for a variant; original_dpt downsamples the deepest level.
    static DepthHeadConfig for_variant(HeadVariant variant);
    void validate() const;
};

/// The four feature maps F1..F4 as channels-first [d, grid_h, grid_w].
struct FeatureBundle {
    std::array<Tensor, 4> levels;
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
};

/// Maps row-major token order onto the (grid_h, grid_w) layout.
FeatureBundle reassemble(const HiddenStates& states);
/// Inverse of the per-level reassembly: [d, gh, gw] back to [gh * gw, d].
Tensor flatten_level(const Tensor& level);

/// DPT-style dense decoder over four token grids.
///
/// Each level is layer-normalized per token, projected by a 1x1 conv and
/// resized to its pyramid resolution. RefineNet blocks fuse top-down from the
/// coarsest level; the output head ends in softplus so depth is positive.
class DepthHead {
public:
    DepthHead(const DepthHeadConfig& config, std::size_t in_dim, ParameterStore& store);

    std::array<Tensor, 4> build_pyramid(const FeatureBundle& bundle) const;
    /// Returns depth [input_h, input_w].
    Tensor fuse_and_decode(const std::array<Tensor, 4>& levels, std::size_t input_h, std::size_t input_w) const;
    /// Full head for the configured variant; one call yields the whole map.
    Tensor decode(const FeatureBundle& bundle, std::size_t input_h, std::size_t input_w) const;

    const DepthHeadConfig& config() const { return config_; }
    std::size_t invocations() const { return invocations_.load(); }

private:
    struct Conv {
        Tensor weight, bias;
    };
    struct ResidualUnit {
        Conv a, b;
    };

    Conv make_conv(ParameterStore& store, const std::string& name, std::size_t cin, std::size_t cout,
                   std::size_t k, float gain);
    ResidualUnit make_rcu(ParameterStore& store, const std::string& name);
    Tensor apply(const Conv& c, const Tensor& x) const;
    Tensor apply(const ResidualUnit& r, const Tensor& x) const;
    Tensor normalize_level(std::size_t k, const Tensor& level) const;

    DepthHeadConfig config_;
    std::size_t in_dim_;
    std::mt19937_64 rng_;
    std::array<Tensor, 4> norm_g_, norm_b_;
    std::array<Conv, 4> project_;
    // refine_[k] fuses level k+1 down into level k (k = 0..2); skip_[k] refines level k.
    std::array<std::array<ResidualUnit, 2>, 3> refine_;
    std::array<ResidualUnit, 3> skip_;
    Conv out1_, out2_, out3_;
    Conv mlp1_, mlp2_;
    mutable std::atomic<std::size_t> invocations_{0};
};

}  // namespace gvk
