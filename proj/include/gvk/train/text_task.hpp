#pragma once

#include <cstddef>

#include "gvk/encoder/encoder.hpp"
#include "gvk/tensor/tensor.hpp"

// Depth question-answer pairs for the language-model side of the joint loss.
//
// Sequence: BOS ASK_DEPTH | U V DEPTH EOS. Only BOS ASK_DEPTH form the
// bidirectional prompt, so image-position hidden states do not depend on the
// queried pixel and a dense forward sees exactly the same image features as
// a training forward. The coordinate tokens sit in the causal part and only
// DEPTH and EOS are scored.
namespace gvk::text_task {

inline constexpr int kBos = 0;
inline constexpr int kEos = 1;
inline constexpr int kAskDepth = 2;
inline constexpr std::size_t kCoordBins = 16;
inline constexpr int kUBase = 3;
inline constexpr int kVBase = kUBase + static_cast<int>(kCoordBins);
inline constexpr int kDepthBase = kVBase + static_cast<int>(kCoordBins);
inline constexpr std::size_t kDepthBins = 28;
inline constexpr double kDepthMin = 0.25;
inline constexpr double kDepthMax = 100.0;
inline constexpr std::size_t kVocabUsed = static_cast<std::size_t>(kDepthBase) + kDepthBins;
inline constexpr std::size_t kPromptLength = 2;

/// Log-spaced bin index of a depth in meters, clamped to the bin range.
std::size_t depth_bin(double meters);
/// Geometric center of a depth bin.
double bin_center(std::size_t bin);
std::size_t coord_bin(std::size_t coord, std::size_t extent);

/// Prompt only, used for dense forwards: BOS ASK_DEPTH.
TextSequence dense_prompt();
/// BOS ASK U V, ready for next-token prediction of the depth token.
TextSequence point_question(std::size_t u, std::size_t v, std::size_t width, std::size_t height);
/// Full training pair with the quantized answer and EOS.
TextSequence point_pair(std::size_t u, std::size_t v, std::size_t width, std::size_t height, double depth);

/// Mean cross-entropy of the DEPTH and EOS tokens given logits [N_t, V].
Tensor answer_loss(const Tensor& text_logits, const TextSequence& pair);

/// Depth in meters decoded from next-token logits [V] restricted to the depth
/// tokens.
double decode_depth(const Tensor& logits);

}  // namespace gvk::text_task
