#include "gvk/train/text_task.hpp"

#include <algorithm>
#include <cmath>

#include "gvk/loss/losses.hpp"
#include "gvk/tensor/ops.hpp"

namespace gvk::text_task {

std::size_t depth_bin(double meters) {
    if (!(meters > 0.0)) throw Error("depth_bin: depth must be > 0");
    const double t = std::log(meters / kDepthMin) / std::log(kDepthMax / kDepthMin);
    const auto bin = static_cast<long>(std::floor(t * static_cast<double>(kDepthBins)));
    return static_cast<std::size_t>(std::clamp<long>(bin, 0, static_cast<long>(kDepthBins) - 1));
}

double bin_center(std::size_t bin) {
    const double t = (static_cast<double>(bin) + 0.5) / static_cast<double>(kDepthBins);
    return kDepthMin * std::pow(kDepthMax / kDepthMin, t);
}

std::size_t coord_bin(std::size_t coord, std::size_t extent) {
    if (coord >= extent) throw Error("coord_bin: coordinate outside image");
    return coord * kCoordBins / extent;
}

TextSequence dense_prompt() { return {{kBos, kAskDepth}, kPromptLength}; }

TextSequence point_question(std::size_t u, std::size_t v, std::size_t width, std::size_t height) {
    return {{kBos, kAskDepth, kUBase + static_cast<int>(coord_bin(u, width)),
             kVBase + static_cast<int>(coord_bin(v, height))},
            kPromptLength};
}

TextSequence point_pair(std::size_t u, std::size_t v, std::size_t width, std::size_t height, double depth) {
    auto seq = point_question(u, v, width, height);
    seq.token_ids.push_back(kDepthBase + static_cast<int>(depth_bin(depth)));
    seq.token_ids.push_back(kEos);
    return seq;
}

Tensor answer_loss(const Tensor& text_logits, const TextSequence& pair) {
    if (pair.size() != 6) throw Error("answer_loss: expected a 6-token depth pair");
    // Rows 3 and 4 predict the DEPTH and EOS tokens.
    auto rows = ops::slice_rows(text_logits, 3, 5);
    std::span<const int> targets(pair.token_ids.data() + 4, 2);
    return text_loss(rows, targets);
}

double decode_depth(const Tensor& logits) {
    const auto l = logits.data();
    if (l.size() < kVocabUsed) throw Error("decode_depth: vocabulary too small");
    std::size_t best = 0;
    for (std::size_t b = 1; b < kDepthBins; ++b)
        if (l[static_cast<std::size_t>(kDepthBase) + b] > l[static_cast<std::size_t>(kDepthBase) + best]) best = b;
    return bin_center(best);
}

}  // namespace gvk::text_task
