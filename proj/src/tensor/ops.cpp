#include "gvk/tensor/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>

namespace gvk::ops {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

using detail::TensorImpl;

bool wants(const TensorImpl& self, std::size_t i) { return self.parents[i]->requires_grad; }

ConstMapMat cmat(const std::vector<float>& v, std::size_t rows, std::size_t cols) {
    return ConstMapMat(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MapMat mmat(std::vector<float>& v, std::size_t rows, std::size_t cols) {
    return MapMat(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
    if (a.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(a.shape()));
    }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
    std::vector<float> out(a.size());
    auto in = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
    return make_result(a.shape(), std::move(out), {a}, [deriv](TensorImpl& self) {
        auto& p = *self.parents[0];
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
    });
}

// Output columns [lo, hi) whose input column ox * stride - pad + kx is inside [0, w).
std::pair<long, long> valid_span(long w, long ow, int stride, int pad, int kx) {
    const long first = pad - kx;
    const long lo = first <= 0 ? 0 : (first + stride - 1) / stride;
    const long last = w - 1 + pad - kx;
    const long hi = last < 0 ? 0 : std::min(ow, last / stride + 1);
    return {std::min(lo, hi), hi};
}

// im2col for a k x k kernel: rows (c, ky, kx), columns (oy, ox).
void im2col(const float* in, std::size_t channels, std::size_t h, std::size_t w, int k, int stride,
            int pad, std::size_t oh, std::size_t ow, float* cols) {
    const std::size_t plane = oh * ow;
    for (std::size_t c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                float* row = cols + ((c * k + ky) * k + kx) * plane;
                const auto [lo, hi] = valid_span(static_cast<long>(w), static_cast<long>(ow), stride, pad, kx);
                const long shift = kx - pad;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const long iy = static_cast<long>(oy) * stride - pad + ky;
                    float* dst = row + oy * ow;
                    if (iy < 0 || iy >= static_cast<long>(h)) {
                        std::fill(dst, dst + ow, 0.0f);
                        continue;
                    }
                    const float* src = in + (c * h + static_cast<std::size_t>(iy)) * w;
                    std::fill(dst, dst + lo, 0.0f);
                    if (stride == 1) {
                        std::copy(src + lo + shift, src + hi + shift, dst + lo);
                    } else {
                        for (long ox = lo; ox < hi; ++ox) dst[ox] = src[ox * stride + shift];
                    }
                    std::fill(dst + hi, dst + ow, 0.0f);
                }
            }
        }
    }
}

void col2im(const float* cols, std::size_t channels, std::size_t h, std::size_t w, int k, int stride,
            int pad, std::size_t oh, std::size_t ow, float* out) {
    const std::size_t plane = oh * ow;
    for (std::size_t c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const float* row = cols + ((c * k + ky) * k + kx) * plane;
                const auto [lo, hi] = valid_span(static_cast<long>(w), static_cast<long>(ow), stride, pad, kx);
                const long shift = kx - pad;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const long iy = static_cast<long>(oy) * stride - pad + ky;
                    if (iy < 0 || iy >= static_cast<long>(h)) continue;
                    float* dst = out + (c * h + static_cast<std::size_t>(iy)) * w;
                    const float* src = row + oy * ow;
                    for (long ox = lo; ox < hi; ++ox) dst[ox * stride + shift] += src[ox];
                }
            }
        }
    }
}


}  // namespace

AxisTaps bilinear_axis_taps(std::size_t in, std::size_t out) {
    AxisTaps s;
    s.lo.resize(out);
    s.hi.resize(out);
    s.frac.resize(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
        double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        auto lo = static_cast<std::size_t>(std::floor(src));
        s.lo[i] = lo;
        s.hi[i] = std::min(lo + 1, in - 1);
        s.frac[i] = static_cast<float>(src - static_cast<double>(lo));
    }
    return s;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<float> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
        for (std::size_t p = 0; p < 2; ++p)
            if (wants(self, p)) self.parents[p]->accumulate_grad(self.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<float> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
        if (wants(self, 0)) self.parents[0]->accumulate_grad(self.grad);
        if (wants(self, 1)) {
            auto& g = self.parents[1]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<float> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
        }
    });
}

Tensor scale(const Tensor& a, float factor) {
    std::vector<float> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
    return make_result(a.shape(), std::move(out), {a}, [factor](TensorImpl& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

Tensor add_scalar(const Tensor& a, float value) {
    std::vector<float> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + value;
    return make_result(a.shape(), std::move(out), {a},
                       [](TensorImpl& self) { self.parents[0]->accumulate_grad(self.grad); });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (float v : a.data()) acc += v;
    return make_result({}, {static_cast<float>(acc)}, {a}, [](TensorImpl& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw ShapeError("mean of empty tensor");
    double acc = 0.0;
    for (float v : a.data()) acc += v;
    const auto n = static_cast<double>(a.size());
    return make_result({}, {static_cast<float>(acc / n)}, {a}, [n](TensorImpl& self) {
        auto& g = self.parents[0]->ensure_grad();
        const float share = static_cast<float>(self.grad[0] / n);
        for (auto& v : g) v += share;
    });
}

Tensor relu(const Tensor& a) {
    return unary(
        a, [](float x) { return x > 0.0f ? x : 0.0f; },
        [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
}

Tensor gelu(const Tensor& a) {
    static constexpr float k = 0.7978845608028654f;  // sqrt(2/pi)
    static constexpr float c = 0.044715f;
    // Scalar loops: Eigen's packet path and its peeled scalar tail round differently.
    return unary(
        a, [](float x) { return 0.5f * x * (1.0f + std::tanh(k * (x + c * x * x * x))); },
        [](float x, float) {
            const float t = std::tanh(k * (x + c * x * x * x));
            return 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * k * (1.0f + 3.0f * c * x * x);
        });
}

Tensor softplus(const Tensor& a) {
    return unary(
        a,
        [](float x) {
            return x > 0.0f ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
        },
        [](float x, float) {
            // sigmoid, evaluated on the stable side
            if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
            const float e = std::exp(x);
            return e / (1.0f + e);
        });
}

Tensor exp(const Tensor& a) {
    return unary(
        a, [](float x) { return std::exp(x); }, [](float, float y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary(
        a, [](float x) { return std::log(x); }, [](float x, float) { return 1.0f / x; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul: inner dims differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    std::vector<float> out(m * n);
    auto& ad = a.impl()->data;
    auto& bd = b.impl()->data;
    mmat(out, m, n).noalias() = cmat(ad, m, k) * cmat(bd, k, n);
    return make_result({m, n}, std::move(out), {a, b}, [m, k, n](TensorImpl& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        auto g = cmat(self.grad, m, n);
        if (pa.requires_grad) mmat(pa.ensure_grad(), m, k).noalias() += g * cmat(pb.data, k, n).transpose();
        if (pb.requires_grad) mmat(pb.ensure_grad(), k, n).noalias() += cmat(pa.data, m, k).transpose() * g;
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(x, 2, "linear");
    require_rank(weight, 2, "linear");
    const std::size_t m = x.dim(0), k = x.dim(1), n = weight.dim(1);
    if (weight.dim(0) != k) {
        throw ShapeError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
    }
    const bool has_bias = bias.size() > 0;
    if (has_bias && bias.size() != n) throw ShapeError("linear: bias size mismatch");
    std::vector<float> out(m * n);
    auto o = mmat(out, m, n);
    o.noalias() = cmat(x.impl()->data, m, k) * cmat(weight.impl()->data, k, n);
    if (has_bias) {
        Eigen::Map<const Eigen::RowVectorXf> bv(bias.impl()->data.data(), static_cast<Eigen::Index>(n));
        o.rowwise() += bv;
    }
    std::vector<Tensor> parents{x, weight};
    if (has_bias) parents.push_back(bias);
    return make_result({m, n}, std::move(out), std::move(parents), [m, k, n, has_bias](TensorImpl& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto g = cmat(self.grad, m, n);
        if (px.requires_grad) mmat(px.ensure_grad(), m, k).noalias() += g * cmat(pw.data, k, n).transpose();
        if (pw.requires_grad) mmat(pw.ensure_grad(), k, n).noalias() += cmat(px.data, m, k).transpose() * g;
        if (has_bias && self.parents[2]->requires_grad) {
            auto& gb = self.parents[2]->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gb[j] += self.grad[i * n + j];
        }
    });
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    const std::size_t r = a.dim(0), c = a.dim(1);
    std::vector<float> out(r * c);
    mmat(out, c, r) = cmat(a.impl()->data, r, c).transpose();
    return make_result({c, r}, std::move(out), {a}, [r, c](TensorImpl& self) {
        mmat(self.parents[0]->ensure_grad(), r, c) += cmat(self.grad, c, r).transpose();
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size()) {
        throw ShapeError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
    }
    std::vector<float> out(a.data().begin(), a.data().end());
    return make_result(std::move(shape), std::move(out), {a},
                       [](TensorImpl& self) { self.parents[0]->accumulate_grad(self.grad); });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, float eps) {
    require_rank(x, 2, "layer_norm");
    const std::size_t n = x.dim(0), c = x.dim(1);
    if (gain.size() != c || bias.size() != c) throw ShapeError("layer_norm: gain/bias size mismatch");
    std::vector<float> out(n * c);
    std::vector<float> xhat(n * c);
    std::vector<float> inv_std(n);
    const auto& xd = x.impl()->data;
    const auto& gd = gain.impl()->data;
    const auto& bd = bias.impl()->data;
    for (std::size_t i = 0; i < n; ++i) {
        const float* row = xd.data() + i * c;
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += row[j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(c);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = static_cast<float>(is);
        for (std::size_t j = 0; j < c; ++j) {
            const float h = static_cast<float>((row[j] - mu) * is);
            xhat[i * c + j] = h;
            out[i * c + j] = h * gd[j] + bd[j];
        }
    }
    return make_result(
        {n, c}, std::move(out), {x, gain, bias},
        [n, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorImpl& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            if (pg.requires_grad || pb.requires_grad) {
                auto& gg = pg.ensure_grad();
                auto& gb = pb.ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                        gg[j] += self.grad[i * c + j] * xhat[i * c + j];
                        gb[j] += self.grad[i * c + j];
                    }
                }
            }
            if (!px.requires_grad) return;
            auto& gx = px.ensure_grad();
            std::vector<float> dxhat(c);
            for (std::size_t i = 0; i < n; ++i) {
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    dxhat[j] = self.grad[i * c + j] * pg.data[j];
                    m1 += dxhat[j];
                    m2 += dxhat[j] * xhat[i * c + j];
                }
                m1 /= static_cast<double>(c);
                m2 /= static_cast<double>(c);
                for (std::size_t j = 0; j < c; ++j) {
                    gx[i * c + j] +=
                        static_cast<float>(inv_std[i] * (dxhat[j] - m1 - xhat[i * c + j] * m2));
                }
            }
        });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
    require_rank(logits, 2, "cross_entropy");
    const std::size_t n = logits.dim(0), v = logits.dim(1);
    if (targets.size() != n) throw ShapeError("cross_entropy: target count != rows");
    if (n == 0) throw ShapeError("cross_entropy: empty target span");
    std::vector<float> probs(n * v);
    std::vector<int> tgt(targets.begin(), targets.end());
    const auto& ld = logits.impl()->data;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (tgt[i] < 0 || static_cast<std::size_t>(tgt[i]) >= v) {
            throw ShapeError("cross_entropy: target id " + std::to_string(tgt[i]) + " out of vocabulary");
        }
        const float* row = ld.data() + i * v;
        const float mx = *std::max_element(row, row + v);
        double z = 0.0;
        for (std::size_t j = 0; j < v; ++j) z += std::exp(static_cast<double>(row[j] - mx));
        const double lse = static_cast<double>(mx) + std::log(z);
        total += lse - row[tgt[i]];
        for (std::size_t j = 0; j < v; ++j) probs[i * v + j] = static_cast<float>(std::exp(row[j] - lse));
    }
    const double loss = total / static_cast<double>(n);
    return make_result({}, {static_cast<float>(loss)}, {logits},
                       [n, v, probs = std::move(probs), tgt = std::move(tgt)](TensorImpl& self) {
                           auto& g = self.parents[0]->ensure_grad();
                           const float s = self.grad[0] / static_cast<float>(n);
                           for (std::size_t i = 0; i < n; ++i) {
                               for (std::size_t j = 0; j < v; ++j) g[i * v + j] += s * probs[i * v + j];
                               g[i * v + static_cast<std::size_t>(tgt[i])] -= s;
                           }
                       });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    if (x.rank() < 1 || begin > end || end > x.dim(0)) {
        throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for " + shape_str(x.shape()));
    }
    const std::size_t row = x.size() / std::max<std::size_t>(x.dim(0), 1);
    Shape shape = x.shape();
    shape[0] = end - begin;
    std::vector<float> out(x.data().begin() + static_cast<long>(begin * row),
                           x.data().begin() + static_cast<long>(end * row));
    return make_result(std::move(shape), std::move(out), {x}, [begin, row](TensorImpl& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * row + i] += self.grad[i];
    });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
    require_rank(x, 2, "gather_rows");
    const std::size_t rows = x.dim(0), c = x.dim(1);
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    std::vector<float> out(idx.size() * c);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= rows) throw ShapeError("gather_rows: index out of range");
        std::copy_n(x.data().begin() + static_cast<long>(idx[i] * c), c, out.begin() + static_cast<long>(i * c));
    }
    const Shape shape{idx.size(), c};
    return make_result(shape, std::move(out), {x}, [c, idx = std::move(idx)](TensorImpl& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) g[idx[i] * c + j] += self.grad[i * c + j];
    });
}

Tensor concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    Shape shape = parts.front().shape();
    if (shape.empty()) throw ShapeError("concat: scalar inputs");
    std::size_t lead = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        if (p.rank() != shape.size() || !std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1)) {
            throw ShapeError("concat: trailing dims differ " + shape_str(shape) + " vs " + shape_str(p.shape()));
        }
        lead += p.dim(0);
    }
    shape[0] = lead;
    std::vector<float> out;
    out.reserve(numel(shape));
    for (const auto& p : parts) {
        offsets.push_back(out.size());
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    return make_result(std::move(shape), std::move(out), parts, [offsets = std::move(offsets)](TensorImpl& self) {
        for (std::size_t p = 0; p < self.parents.size(); ++p) {
            if (!wants(self, p)) continue;
            auto& g = self.parents[p]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offsets[p] + i];
        }
    });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, std::size_t prefix_len) {
    require_rank(q, 2, "attention");
    require_same_shape(q, k, "attention");
    require_same_shape(q, v, "attention");
    const std::size_t n = q.dim(0), d = q.dim(1);
    if (heads == 0 || d % heads != 0) throw ShapeError("attention: dim not divisible by heads");
    const std::size_t dh = d / heads;
    const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));

    const auto& qd = q.impl()->data;
    const auto& kd = k.impl()->data;
    const auto& vd = v.impl()->data;
    std::vector<float> probs(heads * n * n, 0.0f);
    std::vector<float> out(n * d, 0.0f);
    const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(d));
    using StridedConst = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
    using Strided = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
    const auto ni = static_cast<Eigen::Index>(n);
    const auto dhi = static_cast<Eigen::Index>(dh);
    Eigen::ArrayXf buf(ni);
    for (std::size_t h = 0; h < heads; ++h) {
        StridedConst qh(qd.data() + h * dh, ni, dhi, stride);
        StridedConst kh(kd.data() + h * dh, ni, dhi, stride);
        StridedConst vh(vd.data() + h * dh, ni, dhi, stride);
        auto p = mmat(probs, heads * n, n).middleRows(static_cast<Eigen::Index>(h * n), ni);
        p.noalias() = (qh * kh.transpose()) * inv_sqrt;
        for (std::size_t i = 0; i < n; ++i) {
            // Allowed keys form the prefix [0, lim) of each row.
            const auto lim = static_cast<Eigen::Index>(std::max(i + 1, std::min(prefix_len, n)));
            auto row = p.row(static_cast<Eigen::Index>(i));
            // Vectorized reductions peel by address; an owned aligned buffer keeps results bitwise stable.
            auto seg = buf.head(lim);
            seg = row.head(lim).transpose().array();
            seg = (seg - seg.maxCoeff()).exp();
            seg /= seg.sum();
            row.head(lim) = seg.matrix().transpose();
            row.tail(ni - lim).setZero();
        }
        Strided oh(out.data() + h * dh, ni, dhi, stride);
        oh.noalias() = p * vh;
    }
    return make_result(
        {n, d}, std::move(out), {q, k, v},
        [n, d, dh, heads, inv_sqrt, probs = std::move(probs)](TensorImpl& self) {
            auto& pq = *self.parents[0];
            auto& pk = *self.parents[1];
            auto& pv = *self.parents[2];
            const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(d));
            const auto ni = static_cast<Eigen::Index>(n);
            const auto dhi = static_cast<Eigen::Index>(dh);
            auto& gq = pq.ensure_grad();
            auto& gk = pk.ensure_grad();
            auto& gv = pv.ensure_grad();
            RowMat dp(ni, ni);
            for (std::size_t h = 0; h < heads; ++h) {
                StridedConst go(self.grad.data() + h * dh, ni, dhi, stride);
                StridedConst qh(pq.data.data() + h * dh, ni, dhi, stride);
                StridedConst kh(pk.data.data() + h * dh, ni, dhi, stride);
                StridedConst vh(pv.data.data() + h * dh, ni, dhi, stride);
                auto p = cmat(probs, heads * n, n).middleRows(static_cast<Eigen::Index>(h * n), ni);
                if (pv.requires_grad) {
                    Strided(gv.data() + h * dh, ni, dhi, stride).noalias() += p.transpose() * go;
                }
                dp.noalias() = go * vh.transpose();
                // softmax backward: ds = p * (dp - rowsum(dp * p))
                for (Eigen::Index i = 0; i < ni; ++i) {
                    float dot = 0.0f;
                    for (Eigen::Index j = 0; j < ni; ++j) dot += dp(i, j) * p(i, j);
                    dp.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
                }
                dp *= inv_sqrt;
                if (pq.requires_grad) Strided(gq.data() + h * dh, ni, dhi, stride).noalias() += dp * kh;
                if (pk.requires_grad) {
                    Strided(gk.data() + h * dh, ni, dhi, stride).noalias() += dp.transpose() * qh;
                }
            }
        });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int padding) {
    require_rank(input, 3, "conv2d");
    require_rank(weight, 4, "conv2d");
    const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t cout = weight.dim(0);
    const int k = static_cast<int>(weight.dim(2));
    if (weight.dim(1) != cin) {
        throw ShapeError("conv2d: input has " + std::to_string(cin) + " channels but weight expects " +
                         std::to_string(weight.dim(1)));
    }
    if (weight.dim(3) != weight.dim(2) || (k != 1 && k != 3)) throw ShapeError("conv2d: kernel must be 1x1 or 3x3");
    if (stride < 1 || padding < 0) throw ShapeError("conv2d: invalid stride/padding");
    const bool has_bias = bias.size() > 0;
    if (has_bias && bias.size() != cout) throw ShapeError("conv2d: bias size mismatch");
    const long oh_l = (static_cast<long>(h) + 2 * padding - k) / stride + 1;
    const long ow_l = (static_cast<long>(w) + 2 * padding - k) / stride + 1;
    if (oh_l < 1 || ow_l < 1) throw ShapeError("conv2d: output would be empty");
    const auto oh = static_cast<std::size_t>(oh_l), ow = static_cast<std::size_t>(ow_l);
    const std::size_t kk = cin * static_cast<std::size_t>(k * k);
    const std::size_t plane = oh * ow;
    const bool direct = (k == 1 && stride == 1 && padding == 0);

    std::vector<float> cols;
    const float* colp = input.impl()->data.data();
    if (!direct) {
        cols.resize(kk * plane);
        im2col(colp, cin, h, w, k, stride, padding, oh, ow, cols.data());
        colp = cols.data();
    }
    std::vector<float> out(cout * plane);
    auto o = mmat(out, cout, plane);
    o.noalias() = cmat(weight.impl()->data, cout, kk) *
                  ConstMapMat(colp, static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(plane));
    if (has_bias) {
        Eigen::Map<const Eigen::VectorXf> bv(bias.impl()->data.data(), static_cast<Eigen::Index>(cout));
        o.colwise() += bv;
    }
    std::vector<Tensor> parents{input, weight};
    if (has_bias) parents.push_back(bias);
    return make_result(
        {cout, oh, ow}, std::move(out), std::move(parents),
        [=](TensorImpl& self) {
            auto& pin = *self.parents[0];
            auto& pw = *self.parents[1];
            auto g = cmat(self.grad, cout, plane);
            if (has_bias && self.parents[2]->requires_grad) {
                auto& gb = self.parents[2]->ensure_grad();
                for (std::size_t c = 0; c < cout; ++c) {
                    float acc = 0.0f;
                    for (std::size_t q = 0; q < plane; ++q) acc += self.grad[c * plane + q];
                    gb[c] += acc;
                }
            }
            std::vector<float> cols_local;
            const float* cp = pin.data.data();
            if (!direct) {
                cols_local.resize(kk * plane);
                if (pw.requires_grad) {
                    im2col(pin.data.data(), cin, h, w, k, stride, padding, oh, ow, cols_local.data());
                }
                cp = cols_local.data();
            }
            if (pw.requires_grad) {
                mmat(pw.ensure_grad(), cout, kk).noalias() +=
                    g * ConstMapMat(cp, static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(plane)).transpose();
            }
            if (pin.requires_grad) {
                auto& gin = pin.ensure_grad();
                if (direct) {
                    mmat(gin, kk, plane).noalias() += cmat(pw.data, cout, kk).transpose() * g;
                } else {
                    auto dcols = mmat(cols_local, kk, plane);
                    dcols.noalias() = cmat(pw.data, cout, kk).transpose() * g;
                    col2im(cols_local.data(), cin, h, w, k, stride, padding, oh, ow, gin.data());
                }
            }
        });
}

Tensor bilinear_resize(const Tensor& input, std::size_t out_h, std::size_t out_w) {
    require_rank(input, 3, "bilinear_resize");
    if (out_h < 1 || out_w < 1) throw ShapeError("bilinear_resize: output size must be >= 1");
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (h == 0 || w == 0) throw ShapeError("bilinear_resize: empty input");
    if (h == out_h && w == out_w) {
        return reshape(input, input.shape());
    }
    auto sy = bilinear_axis_taps(h, out_h);
    auto sx = bilinear_axis_taps(w, out_w);
    std::vector<float> out(c * out_h * out_w);
    const auto& in = input.impl()->data;
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float* src = in.data() + ch * h * w;
        float* dst = out.data() + ch * out_h * out_w;
        for (std::size_t y = 0; y < out_h; ++y) {
            const float fy = sy.frac[y];
            const float* r0 = src + sy.lo[y] * w;
            const float* r1 = src + sy.hi[y] * w;
            for (std::size_t x = 0; x < out_w; ++x) {
                const float fx = sx.frac[x];
                const float top = r0[sx.lo[x]] * (1.0f - fx) + r0[sx.hi[x]] * fx;
                const float bot = r1[sx.lo[x]] * (1.0f - fx) + r1[sx.hi[x]] * fx;
                dst[y * out_w + x] = top * (1.0f - fy) + bot * fy;
            }
        }
    }
    return make_result({c, out_h, out_w}, std::move(out), {input},
                       [c, h, w, out_h, out_w, sy = std::move(sy), sx = std::move(sx)](TensorImpl& self) {
                           auto& g = self.parents[0]->ensure_grad();
                           for (std::size_t ch = 0; ch < c; ++ch) {
                               float* dst = g.data() + ch * h * w;
                               const float* go = self.grad.data() + ch * out_h * out_w;
                               for (std::size_t y = 0; y < out_h; ++y) {
                                   const float fy = sy.frac[y];
                                   float* r0 = dst + sy.lo[y] * w;
                                   float* r1 = dst + sy.hi[y] * w;
                                   for (std::size_t x = 0; x < out_w; ++x) {
                                       const float fx = sx.frac[x];
                                       const float gv = go[y * out_w + x];
                                       r0[sx.lo[x]] += gv * (1.0f - fy) * (1.0f - fx);
                                       r0[sx.hi[x]] += gv * (1.0f - fy) * fx;
                                       r1[sx.lo[x]] += gv * fy * (1.0f - fx);
                                       r1[sx.hi[x]] += gv * fy * fx;
                                   }
                               }
                           }
                       });
}

Tensor patchify(const Tensor& image, std::size_t patch) {
    require_rank(image, 3, "patchify");
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    if (patch == 0 || h % patch != 0 || w % patch != 0) {
        throw ShapeError("patchify: image " + shape_str(image.shape()) + " not divisible by patch " +
                         std::to_string(patch));
    }
    const std::size_t gh = h / patch, gw = w / patch, cols = c * patch * patch;
    // index[i] = source offset of output element i
    std::vector<std::size_t> index(gh * gw * cols);
    std::size_t o = 0;
    for (std::size_t py = 0; py < gh; ++py)
        for (std::size_t px = 0; px < gw; ++px)
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t y = 0; y < patch; ++y)
                    for (std::size_t x = 0; x < patch; ++x)
                        index[o++] = (ch * h + py * patch + y) * w + px * patch + x;
    std::vector<float> out(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) out[i] = image.data()[index[i]];
    return make_result({gh * gw, cols}, std::move(out), {image}, [index = std::move(index)](TensorImpl& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < index.size(); ++i) g[index[i]] += self.grad[i];
    });
}

}  // namespace gvk::ops
