#include "gvk/encoder/feature_dump.hpp"

#include <json.hpp>

#include "gvk/tensor/checkpoint.hpp"

namespace gvk {

namespace {

std::string meta_json(const FeatureDumpMeta& meta) {
    if (!meta.raw_json.empty()) return meta.raw_json;
    nlohmann::ordered_json j;
    j["image_id"] = meta.image_id;
    j["H"] = meta.image_h;
    j["W"] = meta.image_w;
    j["d"] = meta.dim;
    j["tap_indices"] = {meta.tap_layers[0], meta.tap_layers[1], meta.tap_layers[2]};
    j["model_id"] = meta.model_id;
    return j.dump();
}

const TokenGrid& level(const HiddenStates& s, std::size_t k) { return k < 3 ? s.vit_taps[k] : s.llm_image; }

}  // namespace

std::vector<std::uint8_t> encode_feature_dump(const FeatureDump& dump) {
    dump.states.validate();
    io::ByteWriter w;
    w.str("DVLMFEAT");
    w.u32(1);
    const auto json = meta_json(dump.meta);
    w.u32(static_cast<std::uint32_t>(json.size()));
    w.str(json);
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& g = level(dump.states, k);
        w.u32(dump.meta.level_ids[k]);
        w.u32(static_cast<std::uint32_t>(g.grid_h));
        w.u32(static_cast<std::uint32_t>(g.grid_w));
        w.u32(static_cast<std::uint32_t>(g.dim()));
        for (float v : g.tokens.data()) w.f32(v);
    }
    return std::move(w.buffer());
}

FeatureDump decode_feature_dump(const std::vector<std::uint8_t>& bytes) {
    io::ByteReader r(bytes);
    r.expect_magic("DVLMFEAT");
    const auto version_at = r.offset();
    const auto version = r.u32();
    if (version != 1) throw FormatError("unsupported DVLMFEAT version " + std::to_string(version), version_at);

    FeatureDump dump;
    const auto json_at = r.offset();
    const auto json_len = r.u32();
    dump.meta.raw_json = r.str(json_len);
    try {
        auto j = nlohmann::json::parse(dump.meta.raw_json);
        dump.meta.image_id = j.value("image_id", std::string{});
        dump.meta.image_h = j.value("H", std::size_t{0});
        dump.meta.image_w = j.value("W", std::size_t{0});
        dump.meta.dim = j.value("d", std::size_t{0});
        dump.meta.model_id = j.value("model_id", std::string{});
        if (j.contains("tap_indices")) {
            const auto& t = j.at("tap_indices");
            if (!t.is_array() || t.size() != 3) throw FormatError("tap_indices must list three layers", json_at);
            for (std::size_t k = 0; k < 3; ++k) dump.meta.tap_layers[k] = t.at(k).get<std::size_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid metadata JSON: ") + e.what(), json_at + 4);
    }

    std::array<TokenGrid, 4> grids;
    for (std::size_t k = 0; k < 4; ++k) {
        if (r.at_end()) throw FormatError("level count is " + std::to_string(k) + ", expected 4", r.offset());
        const auto level_at = r.offset();
        dump.meta.level_ids[k] = r.u32();
        const auto gh = r.u32();
        const auto gw = r.u32();
        const auto d = r.u32();
        if (gh == 0 || gw == 0 || d == 0) throw FormatError("level with empty grid or dim", level_at);
        if (k > 0 && dump.meta.level_ids[k] <= dump.meta.level_ids[k - 1]) {
            throw FormatError("level ids must be strictly increasing", level_at);
        }
        if (k > 0 && (gh != grids[0].grid_h || gw != grids[0].grid_w || d != grids[0].dim())) {
            throw FormatError("level " + std::to_string(k + 1) + " grid " + std::to_string(gh) + "x" +
                                  std::to_string(gw) + "x" + std::to_string(d) + " inconsistent with level 1",
                              level_at);
        }
        if (dump.meta.dim != 0 && d != dump.meta.dim) {
            throw FormatError("level dim " + std::to_string(d) + " differs from metadata d", level_at);
        }
        std::vector<float> data(static_cast<std::size_t>(gh) * gw * d);
        r.f32_array(data.data(), data.size());
        grids[k] = {Tensor({static_cast<std::size_t>(gh) * gw, d}, std::move(data)), gh, gw};
    }
    if (!r.at_end()) throw FormatError("level count exceeds 4 (trailing bytes)", r.offset());

    for (std::size_t k = 0; k < 3; ++k) dump.states.vit_taps[k] = grids[k];
    dump.states.llm_image = grids[3];
    dump.states.llm_text = Tensor::zeros({0, grids[3].dim()});
    dump.states.image_h = dump.meta.image_h;
    dump.states.image_w = dump.meta.image_w;
    if (dump.meta.dim == 0) dump.meta.dim = grids[3].dim();
    return dump;
}

void save_feature_dump(const std::filesystem::path& path, const FeatureDump& dump) {
    io::write_file(path, encode_feature_dump(dump));
}

FeatureDump load_feature_dump(const std::filesystem::path& path) { return decode_feature_dump(io::read_file(path)); }

FeatureDump make_feature_dump(const HiddenStates& states, const EncoderConfig& config, std::string image_id,
                              std::string model_id) {
    FeatureDump dump;
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& t = states.vit_taps[k];
        dump.states.vit_taps[k] = {t.tokens.detach(), t.grid_h, t.grid_w};
    }
    dump.states.llm_image = {states.llm_image.tokens.detach(), states.llm_image.grid_h, states.llm_image.grid_w};
    dump.states.llm_text = Tensor::zeros({0, states.llm_image.dim()});
    dump.states.image_h = states.image_h;
    dump.states.image_w = states.image_w;
    dump.meta.image_id = std::move(image_id);
    dump.meta.image_h = states.image_h;
    dump.meta.image_w = states.image_w;
    dump.meta.dim = states.llm_image.dim();
    dump.meta.tap_layers = config.tap_layers;
    dump.meta.model_id = std::move(model_id);
    return dump;
}

}  // namespace gvk
