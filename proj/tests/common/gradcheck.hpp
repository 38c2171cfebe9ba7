#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gvk/tensor/ops.hpp"
#include "gvk/tensor/tensor.hpp"

namespace gvk::test {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f,
                            bool requires_grad = false) {
    std::uniform_real_distribution<float> d(lo, hi);
    std::vector<float> v(numel(shape));
    for (auto& x : v) x = d(rng);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

struct GradCheckResult {
    std::size_t total = 0;
    std::size_t passed = 0;  // relative error < tolerance
    double max_abs = 0.0;
    double max_rel = 0.0;
    double pass_fraction() const { return total ? static_cast<double>(passed) / static_cast<double>(total) : 1.0; }
};

/// Central finite-difference check of d/dx sum(w * f(x)) for every coordinate
/// of every input. `f` maps the inputs to any tensor; the weights w are fixed
/// random values and the weighted sum is evaluated in f64. Relative error is
/// |a - n| / max(|a|, |n|, floor).
inline GradCheckResult grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                                  std::vector<Tensor> inputs, std::uint64_t seed = 7, double eps = 1e-2,
                                  double tol = 1e-3, double floor = 1e-2) {
    for (auto& t : inputs) t.set_requires_grad(true);
    std::mt19937_64 rng(seed);
    const Tensor probe = f(inputs);
    const Tensor w = random_tensor(probe.shape(), rng, 0.5f, 1.5f);

    const auto weighted = [&](const Tensor& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y.data()[i]) * w.data()[i];
        return s;
    };

    auto loss = ops::sum(ops::mul(probe, w));
    loss.backward();
    std::vector<std::vector<float>> analytic;
    for (auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

    GradCheckResult r;
    NoGradGuard no_grad;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto data = inputs[k].mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const float orig = data[i];
            const float hi = orig + static_cast<float>(eps), lo = orig - static_cast<float>(eps);
            data[i] = hi;
            const double fp = weighted(f(inputs));
            data[i] = lo;
            const double fm = weighted(f(inputs));
            data[i] = orig;
            const double numeric = (fp - fm) / (static_cast<double>(hi) - static_cast<double>(lo));
            const double a = analytic[k][i];
            const double abs_err = std::abs(a - numeric);
            const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), floor});
            ++r.total;
            if (rel < tol) ++r.passed;
            r.max_abs = std::max(r.max_abs, abs_err);
            r.max_rel = std::max(r.max_rel, rel);
        }
    }
    return r;
}

}  // namespace gvk::test
