#include "gvk/loss/losses.hpp"

#include <cmath>

#include "gvk/tensor/ops.hpp"

namespace gvk {

namespace {
constexpr double kRadicandFloor = 1e-12;
}

void LossConfig::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("loss: lambda must be in [0,1]");
    if (!(alpha >= 0.0)) throw Error("loss: alpha must be >= 0");
    if (!(log_floor > 0.0)) throw Error("loss: log_floor must be > 0");
}

Tensor silog_loss(const Tensor& pred, const DepthMap& gt, double lambda, double log_floor) {
    if (pred.shape() != gt.values.shape()) {
        throw ShapeError("silog_loss: prediction " + shape_str(pred.shape()) + " vs ground truth " +
                         shape_str(gt.values.shape()));
    }
    const auto p = pred.data();
    const auto g = gt.values.data();
    std::vector<std::size_t> omega;
    std::vector<double> d;
    omega.reserve(p.size());
    d.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!gt.valid[i] || !(g[i] > 0.0f)) continue;
        const double logp = std::log(std::max(static_cast<double>(p[i]), log_floor));
        omega.push_back(i);
        d.push_back(logp - std::log(static_cast<double>(g[i])));
    }
    if (omega.empty()) throw Error("silog_loss: no valid pixels");
    const double n = static_cast<double>(omega.size());
    double s1 = 0.0, s2 = 0.0;
    for (double v : d) {
        s1 += v;
        s2 += v * v;
    }
    const double mean_d = s1 / n;
    const double radicand = s2 / n - lambda * mean_d * mean_d;
    if (!std::isfinite(radicand)) throw Error("silog_loss: non-finite intermediate");
    const bool flat = radicand <= kRadicandFloor;
    const double value = flat ? 0.0 : std::sqrt(radicand);

    return make_result({}, {static_cast<float>(value)}, {pred},
                       [omega = std::move(omega), d = std::move(d), n, mean_d, lambda, value, flat,
                        log_floor](detail::TensorImpl& self) {
                           if (flat) return;
                           auto& parent = *self.parents[0];
                           auto& grad = parent.ensure_grad();
                           const double upstream = self.grad[0];
                           for (std::size_t j = 0; j < omega.size(); ++j) {
                               const auto i = omega[j];
                               const double x = parent.data[i];
                               if (x <= log_floor) continue;  // clamped region
                               const double dl_dd = (d[j] - lambda * mean_d) / (n * value);
                               grad[i] += static_cast<float>(upstream * dl_dd / x);
                           }
                       });
}

Tensor text_loss(const Tensor& logits, std::span<const int> targets) {
    if (targets.empty()) throw Error("text_loss: empty response span");
    return ops::cross_entropy(logits, targets);
}

Tensor response_loss(const Tensor& logits, const TextSequence& text) {
    if (text.prompt_length == 0) throw Error("response_loss: the response must follow a nonempty prompt");
    if (text.response_length() == 0) throw Error("text_loss: empty response span");
    if (logits.rank() != 2 || logits.dim(0) != text.size()) {
        throw ShapeError("response_loss: logits " + shape_str(logits.shape()) + " for " +
                         std::to_string(text.size()) + " text tokens");
    }
    // Row t predicts token t + 1.
    auto rows = ops::slice_rows(logits, text.prompt_length - 1, text.size() - 1);
    std::span<const int> targets(text.token_ids.data() + text.prompt_length, text.response_length());
    return text_loss(rows, targets);
}

Tensor joint_loss(const Tensor& text, const Tensor& depth, double alpha) {
    if (!std::isfinite(text.item()) || !std::isfinite(depth.item())) {
        throw Error("joint_loss: non-finite loss term");
    }
    return ops::add(text, ops::scale(depth, static_cast<float>(alpha)));
}

}  // namespace gvk
