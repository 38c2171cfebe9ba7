#include "gvk/eval/point_query.hpp"

#include <map>

#include "gvk/data/image.hpp"
#include "gvk/train/text_task.hpp"

namespace gvk {

double point_query(const DepthVlm& model, const Tensor& image, std::size_t u, std::size_t v) {
    NoGradGuard no_grad;
    const auto question = text_task::point_question(u, v, image.dim(2), image.dim(1));
    return text_task::decode_depth(model.next_token(image, question));
}

Tensor point_query_map(const DepthVlm& model, const Tensor& image) {
    const auto h = image.dim(1), w = image.dim(2);
    std::vector<float> out(h * w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out[y * w + x] = static_cast<float>(point_query(model, image, x, y));
    return Tensor({h, w}, std::move(out));
}

Tensor dense_depth(const DepthVlm& model, const Tensor& image) {
    NoGradGuard no_grad;
    return model.forward(image, text_task::dense_prompt()).depth;
}

EvalResult evaluate_point_queries(const DepthVlm& model, const Manifest& manifest,
                                  std::span<const PixelQuery> queries, const MetricsConfig& config) {
    config.validate();
    if (queries.empty()) throw Error("evaluate_point_queries: no queries");
    EvalResult result;
    std::map<std::string, Tensor> images;
    for (const auto& q : queries) {
        auto it = images.find(q.sample_id);
        if (it == images.end()) {
            const auto& s = manifest.find(q.sample_id);
            it = images.emplace(q.sample_id, to_tensor(read_png(manifest.resolve(s.image)))).first;
        }
        const auto& img = it->second;
        if (q.v >= img.dim(1) || q.u >= img.dim(2)) {
            throw DataError("query (" + std::to_string(q.u) + "," + std::to_string(q.v) + ") outside image '" +
                            q.sample_id + "'");
        }
        result.records.push_back(score_query(q, point_query(model, img, q.u, q.v), config));
        ++result.predictor_calls;
    }
    result.report = aggregate(result.records);
    return result;
}

}  // namespace gvk
