#include "gvk/head/model.hpp"

namespace gvk {

ModelConfig desk_model_config(HeadVariant variant) {
    ModelConfig c;
    c.encoder.patch_size = 8;
    c.encoder.vit_dim = 32;
    c.encoder.vit_heads = 2;
    c.encoder.llm_dim = 32;
    c.encoder.llm_heads = 2;
    c.head = DepthHeadConfig::for_variant(variant);
    c.head.fusion_channels = 32;
    c.head.output_scale = 16;
    return c;
}

DepthVlm::DepthVlm(const ModelConfig& config) : config_(config) {
    encoder_ = std::make_unique<EncoderStub>(config_.encoder, store_);
    head_ = std::make_unique<DepthHead>(config_.head, config_.encoder.llm_dim, store_);
}

ModelOutput DepthVlm::forward(const Tensor& image, const TextSequence& text) const {
    ++forwards_;
    ModelOutput out;
    out.states = encoder_->encode(image, text);
    out.depth = head_->decode(reassemble(out.states), image.dim(1), image.dim(2));
    out.text_logits = encoder_->text_logits(out.states);
    return out;
}

Tensor DepthVlm::next_token(const Tensor& image, const TextSequence& text) const {
    if (text.size() == 0) throw Error("next_token: empty text");
    ++forwards_;
    return encoder_->next_token_logits(encoder_->encode(image, text), text.size() - 1);
}

Tensor DepthVlm::decode_states(const HiddenStates& states) const {
    auto h = states.image_h;
    auto w = states.image_w;
    if (h == 0 || w == 0) {
        h = states.llm_image.grid_h * config_.head.output_scale;
        w = states.llm_image.grid_w * config_.head.output_scale;
    }
    return head_->decode(reassemble(states), h, w);
}

Tensor image_to_tensor(const std::vector<std::uint8_t>& rgb, std::size_t height, std::size_t width) {
    if (rgb.size() != height * width * 3) throw ShapeError("image_to_tensor: buffer size mismatch");
    std::vector<float> data(rgb.size());
    const auto plane = height * width;
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < 3; ++c) data[c * plane + i] = static_cast<float>(rgb[i * 3 + c]) / 255.0f;
    return Tensor({3, height, width}, std::move(data));
}

}  // namespace gvk
