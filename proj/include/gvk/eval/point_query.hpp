#pragma once

#include <span>

#include "gvk/eval/metrics.hpp"
#include "gvk/head/model.hpp"

namespace gvk {

/// Asks the language model for the depth at one pixel: one full forward of
/// the VLM per query, answer decoded from the depth-bin tokens.
double point_query(const DepthVlm& model, const Tensor& image, std::size_t u, std::size_t v);

/// Depth map [H, W] built from H * W point queries.
Tensor point_query_map(const DepthVlm& model, const Tensor& image);

/// Dense map from a single forward with the dense prompt.
Tensor dense_depth(const DepthVlm& model, const Tensor& image);

/// Scores every query with its own point query (one forward each).
EvalResult evaluate_point_queries(const DepthVlm& model, const Manifest& manifest,
                                  std::span<const PixelQuery> queries, const MetricsConfig& config = {});

}  // namespace gvk
