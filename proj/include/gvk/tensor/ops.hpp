#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gvk/tensor/tensor.hpp"

// Differentiable tensor operations. All functions are pure: they allocate a
// new result and record a backward closure when any input requires grad.
namespace gvk::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor add_scalar(const Tensor& a, float value);

/// Sum of all elements, accumulated in f64.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);  // tanh approximation
/// ln(1 + e^x), computed as x + ln(1 + e^-x) for x > 0.
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

/// [M,K] x [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);
/// x[N,in] * w[in,out] + bias[out]; bias may be undefined-size 0.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// Normalizes each row of x[N,C] and applies gain/bias of shape [C].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, float eps = 1e-5f);

/// Mean negative log-softmax of `targets` under logits[N,V], reduced in f64.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

/// Rows [begin, end) of a rank-2 tensor.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
/// Output row i is x[indices[i]].
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);
/// Concatenates along axis 0; trailing dims must agree.
Tensor concat(const std::vector<Tensor>& parts);

/// Multi-head scaled dot-product attention over q,k,v of shape [N,D].
/// Position i attends to j when j <= i or j < prefix_len, so prefix_len = N
/// yields full bidirectional attention and prefix_len = 0 pure causal.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                 std::size_t prefix_len);

/// Cross-correlation of input[C_in,H,W] with weight[C_out,C_in,k,k].
/// `bias` may be a default-constructed (empty) tensor.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride = 1,
              int padding = 0);

/// Source taps of half-pixel-center bilinear sampling along one axis:
/// src = clamp((dst + 0.5) * in / out - 0.5, 0, in - 1).
struct AxisTaps {
    std::vector<std::size_t> lo, hi;
    std::vector<float> frac;
};
AxisTaps bilinear_axis_taps(std::size_t in, std::size_t out);

/// Half-pixel-center bilinear resize of input[C,H,W]; source coordinates are
/// clamped to the image.
Tensor bilinear_resize(const Tensor& input, std::size_t out_h, std::size_t out_w);

/// Non-overlapping p x p patches of image[C,H,W] flattened to [(H/p)(W/p), C*p*p],
/// patches in row-major grid order, each patch laid out channel-major.
Tensor patchify(const Tensor& image, std::size_t patch);

}  // namespace gvk::ops
