#include "gvk/encoder/encoder.hpp"

#include <cmath>

#include "gvk/tensor/init.hpp"
#include "gvk/tensor/ops.hpp"

namespace gvk {

namespace {

constexpr float kInitSigma = 0.02f;
// Position codes are scaled down so patch content dominates token features.
constexpr float kPositionAmplitude = 0.1f;

}  // namespace

void EncoderConfig::validate() const {
    if (patch_size == 0 || merge_factor == 0) throw Error("encoder: patch_size and merge_factor must be > 0");
    if (vit_layers == 0 || llm_layers == 0) throw Error("encoder: layer counts must be > 0");
    if (!(tap_layers[0] >= 1 && tap_layers[0] < tap_layers[1] && tap_layers[1] < tap_layers[2] &&
          tap_layers[2] <= vit_layers)) {
        throw Error("encoder: tap layers must satisfy 1 <= l1 < l2 < l3 <= vit_layers");
    }
    if (vit_dim % 4 != 0 || llm_dim % 2 != 0) throw Error("encoder: vit_dim must be a multiple of 4, llm_dim even");
    if (vit_dim % vit_heads != 0 || llm_dim % llm_heads != 0) throw Error("encoder: dims must divide by head count");
    if (vocab_size < 2) throw Error("encoder: vocab_size must be >= 2");
}

void EncoderConfig::check_resolution(std::size_t height, std::size_t width) const {
    const auto m = token_stride();
    if (height == 0 || width == 0 || height % m != 0 || width % m != 0) {
        throw ShapeError("image " + std::to_string(height) + "x" + std::to_string(width) +
                         " is not divisible by patch_size*merge_factor = " + std::to_string(m) +
                         "; height and width must be multiples of " + std::to_string(m));
    }
}

void HiddenStates::validate() const {
    const auto& ref = llm_image;
    if (ref.tokens.rank() != 2 || ref.tokens.dim(0) != ref.count()) {
        throw ShapeError("hidden states: LLM image grid inconsistent with its token count");
    }
    for (const auto& tap : vit_taps) {
        if (tap.grid_h != ref.grid_h || tap.grid_w != ref.grid_w) {
            throw ShapeError("hidden states: tap grid " + std::to_string(tap.grid_h) + "x" +
                             std::to_string(tap.grid_w) + " differs from LLM grid " + std::to_string(ref.grid_h) +
                             "x" + std::to_string(ref.grid_w));
        }
        if (tap.tokens.rank() != 2 || tap.tokens.dim(0) != tap.count() || tap.dim() != ref.dim()) {
            throw ShapeError("hidden states: tap tokens " + shape_str(tap.tokens.shape()) + " do not match grid");
        }
    }
}

Tensor position_code_2d(std::size_t grid_h, std::size_t grid_w, std::size_t dim) {
    const std::size_t quarter = dim / 4;
    std::vector<float> data(grid_h * grid_w * dim);
    for (std::size_t y = 0; y < grid_h; ++y) {
        for (std::size_t x = 0; x < grid_w; ++x) {
            float* row = data.data() + (y * grid_w + x) * dim;
            for (std::size_t i = 0; i < quarter; ++i) {
                const double freq = std::pow(100.0, -static_cast<double>(i) / static_cast<double>(quarter));
                row[i] = kPositionAmplitude * static_cast<float>(std::sin(y * freq));
                row[quarter + i] = kPositionAmplitude * static_cast<float>(std::cos(y * freq));
                row[2 * quarter + i] = kPositionAmplitude * static_cast<float>(std::sin(x * freq));
                row[3 * quarter + i] = kPositionAmplitude * static_cast<float>(std::cos(x * freq));
            }
        }
    }
    return Tensor({grid_h * grid_w, dim}, std::move(data));
}

Tensor position_code_1d(std::size_t offset, std::size_t count, std::size_t dim) {
    const std::size_t half = dim / 2;
    std::vector<float> data(count * dim);
    for (std::size_t p = 0; p < count; ++p) {
        const double pos = static_cast<double>(offset + p);
        for (std::size_t i = 0; i < half; ++i) {
            const double freq = std::pow(1000.0, -static_cast<double>(i) / static_cast<double>(half));
            data[p * dim + i] = kPositionAmplitude * static_cast<float>(std::sin(pos * freq));
            data[p * dim + half + i] = kPositionAmplitude * static_cast<float>(std::cos(pos * freq));
        }
    }
    return Tensor({count, dim}, std::move(data));
}

EncoderStub::EncoderStub(const EncoderConfig& config, ParameterStore& store) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(config_.seed);
    const auto vd = config_.vit_dim;
    const auto d = config_.llm_dim;
    const auto patch_in = 3 * config_.patch_size * config_.patch_size;
    const auto merge_in = vd * config_.merge_factor * config_.merge_factor;

    patch_w_ = store.add("vit.patch_embed.weight", init::gaussian({patch_in, vd}, kInitSigma, rng));
    patch_b_ = store.add("vit.patch_embed.bias", Tensor::zeros({vd}));
    for (std::size_t l = 0; l < config_.vit_layers; ++l) {
        vit_blocks_.push_back(make_block(store, "vit.blocks." + std::to_string(l), vd, rng));
    }
    merge_w_ = store.add("vit.merger.weight", init::gaussian({merge_in, d}, kInitSigma, rng));
    merge_b_ = store.add("vit.merger.bias", Tensor::zeros({d}));
    proj_w_ = store.add("proj.main.weight", init::gaussian({d, d}, kInitSigma, rng));
    proj_b_ = store.add("proj.main.bias", Tensor::zeros({d}));
    for (std::size_t k = 0; k < 3; ++k) {
        if (config_.share_tap_projector) {
            tap_w_[k] = proj_w_;
            tap_b_[k] = proj_b_;
        } else {
            tap_w_[k] = store.add("proj.tap" + std::to_string(k) + ".weight", init::gaussian({d, d}, kInitSigma, rng));
            tap_b_[k] = store.add("proj.tap" + std::to_string(k) + ".bias", Tensor::zeros({d}));
        }
    }
    embed_ = store.add("llm.embed", init::gaussian({config_.vocab_size, d}, kInitSigma, rng));
    for (std::size_t l = 0; l < config_.llm_layers; ++l) {
        llm_blocks_.push_back(make_block(store, "llm.blocks." + std::to_string(l), d, rng));
    }
    norm_g_ = store.add("llm.norm.gain", Tensor::full({d}, 1.0f));
    norm_b_ = store.add("llm.norm.bias", Tensor::zeros({d}));
    head_w_ = store.add("llm.lm_head.weight", init::gaussian({d, config_.vocab_size}, kInitSigma, rng));
    head_b_ = store.add("llm.lm_head.bias", Tensor::zeros({config_.vocab_size}));
}

EncoderStub::Block EncoderStub::make_block(ParameterStore& store, const std::string& prefix, std::size_t dim,
                                           std::mt19937_64& rng) {
    const auto hidden = dim * config_.mlp_ratio;
    auto w = [&](const std::string& name, Shape shape) {
        return store.add(prefix + "." + name, init::gaussian(std::move(shape), kInitSigma, rng));
    };
    auto z = [&](const std::string& name, std::size_t n) { return store.add(prefix + "." + name, Tensor::zeros({n})); };
    auto one = [&](const std::string& name, std::size_t n) {
        return store.add(prefix + "." + name, Tensor::full({n}, 1.0f));
    };
    Block b;
    b.ln1_g = one("ln1.gain", dim);
    b.ln1_b = z("ln1.bias", dim);
    b.wq = w("attn.q.weight", {dim, dim});
    b.bq = z("attn.q.bias", dim);
    b.wk = w("attn.k.weight", {dim, dim});
    b.bk = z("attn.k.bias", dim);
    b.wv = w("attn.v.weight", {dim, dim});
    b.bv = z("attn.v.bias", dim);
    b.wo = w("attn.out.weight", {dim, dim});
    b.bo = z("attn.out.bias", dim);
    b.ln2_g = one("ln2.gain", dim);
    b.ln2_b = z("ln2.bias", dim);
    b.fc1_w = w("mlp.fc1.weight", {dim, hidden});
    b.fc1_b = z("mlp.fc1.bias", hidden);
    b.fc2_w = w("mlp.fc2.weight", {hidden, dim});
    b.fc2_b = z("mlp.fc2.bias", dim);
    return b;
}

Tensor EncoderStub::run_block(const Block& b, const Tensor& x, std::size_t heads, std::size_t prefix_len) const {
    auto h = ops::layer_norm(x, b.ln1_g, b.ln1_b);
    auto q = ops::linear(h, b.wq, b.bq);
    auto k = ops::linear(h, b.wk, b.bk);
    auto v = ops::linear(h, b.wv, b.bv);
    auto a = ops::linear(ops::attention(q, k, v, heads, prefix_len), b.wo, b.bo);
    auto y = ops::add(x, a);
    auto m = ops::layer_norm(y, b.ln2_g, b.ln2_b);
    m = ops::linear(ops::gelu(ops::linear(m, b.fc1_w, b.fc1_b)), b.fc2_w, b.fc2_b);
    return ops::add(y, m);
}

Tensor EncoderStub::merge(const Tensor& tokens, std::size_t grid_h, std::size_t grid_w) const {
    const auto f = config_.merge_factor;
    const auto mh = grid_h / f, mw = grid_w / f;
    std::vector<std::size_t> index;
    index.reserve(grid_h * grid_w);
    for (std::size_t y = 0; y < mh; ++y)
        for (std::size_t x = 0; x < mw; ++x)
            for (std::size_t dy = 0; dy < f; ++dy)
                for (std::size_t dx = 0; dx < f; ++dx) index.push_back((y * f + dy) * grid_w + x * f + dx);
    auto grouped = ops::reshape(ops::gather_rows(tokens, index), {mh * mw, f * f * tokens.dim(1)});
    return ops::linear(grouped, merge_w_, merge_b_);
}

HiddenStates EncoderStub::encode(const Tensor& image, const TextSequence& text) const {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw ShapeError("encode: image must be [3,H,W], got " + shape_str(image.shape()));
    }
    const auto height = image.dim(1), width = image.dim(2);
    config_.check_resolution(height, width);
    if (text.prompt_length > text.size()) throw Error("encode: prompt_length exceeds text length");
    for (int id : text.token_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
            throw Error("encode: token id " + std::to_string(id) + " outside vocabulary");
        }
    }

    const auto ph = height / config_.patch_size, pw = width / config_.patch_size;
    auto x = ops::linear(ops::patchify(image, config_.patch_size), patch_w_, patch_b_);
    x = ops::add(x, position_code_2d(ph, pw, config_.vit_dim));

    std::array<Tensor, 3> taps;
    for (std::size_t l = 0; l < vit_blocks_.size(); ++l) {
        x = run_block(vit_blocks_[l], x, config_.vit_heads, x.dim(0));
        for (std::size_t k = 0; k < 3; ++k)
            if (config_.tap_layers[k] == l + 1) taps[k] = x;
    }

    HiddenStates out;
    out.image_h = height;
    out.image_w = width;
    const auto gh = ph / config_.merge_factor, gw = pw / config_.merge_factor;
    for (std::size_t k = 0; k < 3; ++k) {
        out.vit_taps[k] = {ops::linear(merge(taps[k], ph, pw), tap_w_[k], tap_b_[k]), gh, gw};
    }
    auto image_tokens = ops::linear(merge(x, ph, pw), proj_w_, proj_b_);
    const auto nv = image_tokens.dim(0);

    std::vector<std::size_t> ids(text.token_ids.begin(), text.token_ids.end());
    auto text_tokens = ops::gather_rows(embed_, ids);
    auto seq = ops::concat({image_tokens, text_tokens});
    seq = ops::add(seq, position_code_1d(0, seq.dim(0), config_.llm_dim));
    const auto prefix = nv + text.prompt_length;
    for (const auto& block : llm_blocks_) seq = run_block(block, seq, config_.llm_heads, prefix);
    seq = ops::layer_norm(seq, norm_g_, norm_b_);

    out.llm_image = {ops::slice_rows(seq, 0, nv), gh, gw};
    out.llm_text = ops::slice_rows(seq, nv, seq.dim(0));
    return out;
}

Tensor EncoderStub::text_logits(const HiddenStates& states) const {
    return ops::linear(states.llm_text, head_w_, head_b_);
}

Tensor EncoderStub::next_token_logits(const HiddenStates& states, std::size_t position) const {
    if (states.llm_text.rank() != 2 || position >= states.llm_text.dim(0)) {
        throw Error("next_token_logits: position " + std::to_string(position) + " outside text span of length " +
                    std::to_string(states.llm_text.rank() == 2 ? states.llm_text.dim(0) : 0));
    }
    auto row = ops::slice_rows(states.llm_text, position, position + 1);
    return ops::reshape(ops::linear(row, head_w_, head_b_), {config_.vocab_size});
}

}  // namespace gvk
