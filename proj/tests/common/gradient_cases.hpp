#pragma once

#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "gvk/loss/losses.hpp"

namespace gvk::test {

struct GradCase {
    std::string name;
    std::function<Tensor(const std::vector<Tensor>&)> f;
    std::vector<Tensor> inputs;
    bool core = false;  // one of the ops named by the acceptance gradient suite
};

// Values kept away from 0 so the relu kink and log/clamp regions are not straddled.
inline Tensor away_from_zero(Shape shape, std::mt19937_64& rng, float lo, float hi) {
    auto t = random_tensor(std::move(shape), rng, lo, hi);
    std::bernoulli_distribution sign(0.5);
    for (auto& v : t.mutable_data()) v = sign(rng) ? v : -v;
    return t;
}

inline std::vector<GradCase> gradient_cases(std::uint64_t seed = 11) {
    std::mt19937_64 rng(seed);
    std::vector<GradCase> cases;

    for (int stride : {1, 2}) {
        for (int pad : {0, 1}) {
            cases.push_back({"conv2d 3x3 stride " + std::to_string(stride) + " pad " + std::to_string(pad),
                             [stride, pad](const std::vector<Tensor>& in) {
                                 return ops::conv2d(in[0], in[1], in[2], stride, pad);
                             },
                             {random_tensor({2, 5, 6}, rng), random_tensor({3, 2, 3, 3}, rng),
                              random_tensor({3}, rng)},
                             true});
        }
    }
    cases.push_back({"conv2d 1x1",
                     [](const std::vector<Tensor>& in) { return ops::conv2d(in[0], in[1], in[2], 1, 0); },
                     {random_tensor({4, 3, 3}, rng), random_tensor({2, 4, 1, 1}, rng), random_tensor({2}, rng)},
                     true});
    cases.push_back({"bilinear_resize up",
                     [](const std::vector<Tensor>& in) { return ops::bilinear_resize(in[0], 7, 9); },
                     {random_tensor({2, 3, 4}, rng)},
                     true});
    cases.push_back({"bilinear_resize down",
                     [](const std::vector<Tensor>& in) { return ops::bilinear_resize(in[0], 3, 2); },
                     {random_tensor({2, 7, 5}, rng)},
                     true});
    cases.push_back({"softplus", [](const std::vector<Tensor>& in) { return ops::softplus(in[0]); },
                     {random_tensor({5, 6}, rng, -4.0f, 4.0f)},
                     true});
    cases.push_back({"matmul", [](const std::vector<Tensor>& in) { return ops::matmul(in[0], in[1]); },
                     {random_tensor({4, 5}, rng), random_tensor({5, 3}, rng)},
                     true});
    cases.push_back({"layer_norm",
                     [](const std::vector<Tensor>& in) { return ops::layer_norm(in[0], in[1], in[2]); },
                     {random_tensor({4, 6}, rng, -2.0f, 2.0f), random_tensor({6}, rng, 0.5f, 1.5f),
                      random_tensor({6}, rng)},
                     true});
    {
        std::vector<int> targets{1, 4, 0, 2};
        cases.push_back({"cross_entropy",
                         [targets](const std::vector<Tensor>& in) { return ops::cross_entropy(in[0], targets); },
                         {random_tensor({4, 6}, rng, -2.0f, 2.0f)},
                         true});
    }
    {
        auto gt_values = random_tensor({8, 8}, rng, 0.5f, 5.0f);
        std::vector<std::uint8_t> mask(64, 1);
        for (std::size_t i = 0; i < mask.size(); i += 7) mask[i] = 0;
        DepthMap gt(gt_values, mask);
        for (double lambda : {0.0, 0.5, 1.0}) {
            cases.push_back({"silog lambda " + std::to_string(lambda).substr(0, 3),
                             [gt, lambda](const std::vector<Tensor>& in) { return silog_loss(in[0], gt, lambda); },
                             {random_tensor({8, 8}, rng, 0.3f, 6.0f)},
                             true});
        }
    }

    cases.push_back({"add", [](const std::vector<Tensor>& in) { return ops::add(in[0], in[1]); },
                     {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}});
    cases.push_back({"mul", [](const std::vector<Tensor>& in) { return ops::mul(in[0], in[1]); },
                     {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}});
    cases.push_back({"relu", [](const std::vector<Tensor>& in) { return ops::relu(in[0]); },
                     {away_from_zero({3, 4}, rng, 0.1f, 1.0f)}});
    cases.push_back({"gelu", [](const std::vector<Tensor>& in) { return ops::gelu(in[0]); },
                     {random_tensor({3, 4}, rng, -3.0f, 3.0f)}});
    cases.push_back({"exp", [](const std::vector<Tensor>& in) { return ops::exp(in[0]); },
                     {random_tensor({3, 4}, rng)}});
    cases.push_back({"log", [](const std::vector<Tensor>& in) { return ops::log(in[0]); },
                     {random_tensor({3, 4}, rng, 0.5f, 3.0f)}});
    cases.push_back({"linear",
                     [](const std::vector<Tensor>& in) { return ops::linear(in[0], in[1], in[2]); },
                     {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng), random_tensor({5}, rng)}});
    cases.push_back({"transpose+reshape",
                     [](const std::vector<Tensor>& in) { return ops::reshape(ops::transpose(in[0]), {2, 6}); },
                     {random_tensor({3, 4}, rng)}});
    cases.push_back({"mean", [](const std::vector<Tensor>& in) { return ops::mean(in[0]); },
                     {random_tensor({3, 4}, rng)}});
    cases.push_back({"scale+add_scalar",
                     [](const std::vector<Tensor>& in) { return ops::add_scalar(ops::scale(in[0], -1.5f), 0.25f); },
                     {random_tensor({3, 4}, rng)}});
    cases.push_back({"slice/gather/concat",
                     [](const std::vector<Tensor>& in) {
                         const std::vector<std::size_t> idx{2, 0, 2, 3};
                         return ops::concat({ops::slice_rows(in[0], 1, 3), ops::gather_rows(in[0], idx)});
                     },
                     {random_tensor({4, 3}, rng)}});
    for (std::size_t prefix : {0u, 2u, 5u}) {
        cases.push_back({"attention prefix " + std::to_string(prefix),
                         [prefix](const std::vector<Tensor>& in) { return ops::attention(in[0], in[1], in[2], 2, prefix); },
                         {random_tensor({5, 4}, rng), random_tensor({5, 4}, rng), random_tensor({5, 4}, rng)}});
    }
    cases.push_back({"patchify", [](const std::vector<Tensor>& in) { return ops::patchify(in[0], 2); },
                     {random_tensor({2, 4, 6}, rng)}});
    return cases;
}

}  // namespace gvk::test
