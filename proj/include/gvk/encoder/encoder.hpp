#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gvk/tensor/optim.hpp"
#include "gvk/tensor/tensor.hpp"

namespace gvk {

struct EncoderConfig {
    std::size_t patch_size = 16;
    std::size_t merge_factor = 2;
    std::size_t vit_layers = 8;
    std::size_t vit_dim = 64;
    std::size_t vit_heads = 4;
    std::size_t llm_layers = 4;
    std::size_t llm_dim = 64;
    std::size_t llm_heads = 4;
    std::size_t mlp_ratio = 2;
    std::array<std::size_t, 3> tap_layers{2, 4, 6};
    std::size_t vocab_size = 64;
    /// When true the three taps reuse the main projector instead of
    /// owning one linear map each.
    bool share_tap_projector = false;
    std::uint64_t seed = 0;

    /// Tokens are downsampled by this factor in each spatial dimension.
    std::size_t token_stride() const { return patch_size * merge_factor; }
    void validate() const;
    /// Throws naming the required multiple when H or W is not divisible.
    void check_resolution(std::size_t height, std::size_t width) const;
};

/// Tokens laid out on a row-major grid.
struct TokenGrid {
    Tensor tokens;  // [grid_h * grid_w, dim]
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;

    std::size_t count() const { return grid_h * grid_w; }
    std::size_t dim() const { return tokens.rank() == 2 ? tokens.dim(1) : 0; }
};

struct TextSequence {
    std::vector<int> token_ids;
    /// Tokens [0, prompt_length) are the prompt; the rest is the response.
    std::size_t prompt_length = 0;

    std::size_t size() const { return token_ids.size(); }
    std::size_t response_length() const { return token_ids.size() - prompt_length; }
};

/// Everything the depth head and text loss consume from one encoder pass.
struct HiddenStates {
    std::array<TokenGrid, 3> vit_taps;  // projected to llm_dim
    TokenGrid llm_image;                // final LLM states at image positions
    Tensor llm_text;                    // [N_t, llm_dim]; may have zero rows
    std::size_t image_h = 0;
    std::size_t image_w = 0;

    /// Throws unless the four grids share extent and channel dim.
    void validate() const;
};

/// Deterministic miniature vision-language backbone: ViT with tapped
/// intermediate layers, spatial patch merger, projector and a small
/// transformer language model over [image tokens; text tokens].
///
/// Attention in the language model is prefix-bidirectional over image and
/// prompt tokens and causal over response tokens.
///
/// Parameter prefixes: "vit." (patch embed, blocks, merger), "proj." (main
/// projector and per-tap maps), "llm." (embeddings, blocks, norm, lm head).
class EncoderStub {
public:
    EncoderStub(const EncoderConfig& config, ParameterStore& store);

    HiddenStates encode(const Tensor& image, const TextSequence& text) const;

    /// Logits predicting the token after text position `position`.
    Tensor next_token_logits(const HiddenStates& states, std::size_t position) const;
    /// Logits for every text position, [N_t, vocab_size].
    Tensor text_logits(const HiddenStates& states) const;

    const EncoderConfig& config() const { return config_; }

private:
    struct Block {
        Tensor ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;
    };

    Block make_block(ParameterStore& store, const std::string& prefix, std::size_t dim, std::mt19937_64& rng);
    Tensor run_block(const Block& b, const Tensor& x, std::size_t heads, std::size_t prefix_len) const;
    Tensor merge(const Tensor& tokens, std::size_t grid_h, std::size_t grid_w) const;

    EncoderConfig config_;
    Tensor patch_w_, patch_b_;
    std::vector<Block> vit_blocks_;
    Tensor merge_w_, merge_b_;
    Tensor proj_w_, proj_b_;
    std::array<Tensor, 3> tap_w_, tap_b_;
    Tensor embed_;
    std::vector<Block> llm_blocks_;
    Tensor norm_g_, norm_b_;
    Tensor head_w_, head_b_;
};

/// Sinusoidal 2-D position code for a grid, [gh * gw, dim]. dim % 4 == 0.
Tensor position_code_2d(std::size_t grid_h, std::size_t grid_w, std::size_t dim);
/// Sinusoidal 1-D position code, [count, dim] for positions offset..offset+count-1.
Tensor position_code_1d(std::size_t offset, std::size_t count, std::size_t dim);

}  // namespace gvk
