#pragma once

#include <atomic>
#include <memory>

#include "gvk/encoder/encoder.hpp"
#include "gvk/head/depth_head.hpp"
#include "gvk/head/depth_map.hpp"

namespace gvk {

struct ModelConfig {
    EncoderConfig encoder;
    DepthHeadConfig head;
};

/// Small configuration for CPU experiments: 8-px patches (16-px token stride),
/// 32-wide ViT and LLM with 2 heads, 32 fusion channels.
ModelConfig desk_model_config(HeadVariant variant = HeadVariant::lightweight_dpt);

struct ModelOutput {
    Tensor depth;        // [H, W], strictly positive
    Tensor text_logits;  // [N_t, vocab]
    HiddenStates states;
};

/// Encoder stub plus depth head. One forward returns the dense depth map and
/// the text logits of the same language-model pass.
class DepthVlm {
public:
    explicit DepthVlm(const ModelConfig& config);
    DepthVlm(const DepthVlm&) = delete;
    DepthVlm& operator=(const DepthVlm&) = delete;

    ModelOutput forward(const Tensor& image, const TextSequence& text) const;
    /// Language-model pass only: logits for the token after the last text
    /// position. Counts as one forward.
    Tensor next_token(const Tensor& image, const TextSequence& text) const;

    /// Head only, e.g. for hidden states ingested from a feature dump. When
    /// the states carry no image size it is grid * output_scale.
    Tensor decode_states(const HiddenStates& states) const;

    ParameterStore& parameters() { return store_; }
    const ParameterStore& parameters() const { return store_; }
    const EncoderStub& encoder() const { return *encoder_; }
    const DepthHead& head() const { return *head_; }
    const ModelConfig& config() const { return config_; }

    std::size_t forward_count() const { return forwards_.load(); }
    void reset_forward_count() { forwards_ = 0; }

private:
    ModelConfig config_;
    ParameterStore store_;
    std::unique_ptr<EncoderStub> encoder_;
    std::unique_ptr<DepthHead> head_;
    mutable std::atomic<std::size_t> forwards_{0};
};

/// Image tensor [3,H,W] from interleaved 8-bit RGB.
Tensor image_to_tensor(const std::vector<std::uint8_t>& rgb, std::size_t height, std::size_t width);

}  // namespace gvk
