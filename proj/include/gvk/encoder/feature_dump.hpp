#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gvk/encoder/encoder.hpp"

namespace gvk {

/// Metadata carried by a DVLMFEAT file.
struct FeatureDumpMeta {
    std::string image_id;
    std::size_t image_h = 0;
    std::size_t image_w = 0;
    std::size_t dim = 0;
    std::array<std::size_t, 3> tap_layers{0, 0, 0};
    std::string model_id;
    /// Level ids as stored on disk, F1..F4 order.
    std::array<std::uint32_t, 4> level_ids{1, 2, 3, 4};
    /// Exact metadata JSON text; re-emitted verbatim when present.
    std::string raw_json;
};

struct FeatureDump {
    FeatureDumpMeta meta;
    HiddenStates states;
};

// DVLMFEAT layout (little-endian): "DVLMFEAT", u32 version = 1, u32 length +
// metadata JSON, then four levels of {u32 level id, u32 grid_h, u32 grid_w,
// u32 d, f32 [grid_h * grid_w, d] row-major}.
std::vector<std::uint8_t> encode_feature_dump(const FeatureDump& dump);
FeatureDump decode_feature_dump(const std::vector<std::uint8_t>& bytes);

void save_feature_dump(const std::filesystem::path& path, const FeatureDump& dump);
/// Loads hidden states from a dump without running any encoder.
FeatureDump load_feature_dump(const std::filesystem::path& path);

/// Builds a dump from stub-produced states (llm_text is not stored).
FeatureDump make_feature_dump(const HiddenStates& states, const EncoderConfig& config, std::string image_id,
                              std::string model_id = "gvk-stub");

}  // namespace gvk
