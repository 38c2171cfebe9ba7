#pragma once

#include <cstddef>
#include <span>

#include "gvk/encoder/encoder.hpp"
#include "gvk/head/depth_map.hpp"
#include "gvk/tensor/tensor.hpp"

namespace gvk {

struct LossConfig {
    double lambda = 0.5;
    double alpha = 1.0;
    double log_floor = 1e-6;

    void validate() const;
};

struct LossReport {
    double depth_loss = 0.0;
    double text_loss = 0.0;
    double joint = 0.0;
    std::size_t valid_pixel_count = 0;
};

/// Scale-invariant log loss
///   sqrt( mean(d^2) - lambda * mean(d)^2 ),  d = log(max(pred, floor)) - log(gt)
/// over pixels where gt is valid and > 0. Sums accumulate in f64. When the
/// radicand is <= 1e-12 the value is clamped and the gradient is zero.
Tensor silog_loss(const Tensor& pred, const DepthMap& gt, double lambda, double log_floor = 1e-6);

/// Mean negative log-likelihood of `targets` under `logits` [N, V].
Tensor text_loss(const Tensor& logits, std::span<const int> targets);

/// Next-token loss over the response tokens of `text`, where `logits` holds one
/// row per text position. Prompt tokens are not scored.
Tensor response_loss(const Tensor& logits, const TextSequence& text);

/// text + alpha * depth; throws if either term is non-finite.
Tensor joint_loss(const Tensor& text, const Tensor& depth, double alpha);

}  // namespace gvk
