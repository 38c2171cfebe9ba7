#include "gvk/eval/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "gvk/data/image.hpp"
#include "gvk/train/text_task.hpp"

namespace gvk {

void MetricsConfig::validate() const {
    if (!(delta_threshold > 1.0)) throw Error("metrics: delta_threshold must be > 1");
}

namespace {

void check_positive(double pred, double gt, std::size_t index) {
    if (!(pred > 0.0) || !std::isfinite(pred)) {
        throw Error("delta1: prediction at index " + std::to_string(index) + " is not positive");
    }
    if (!(gt > 0.0) || !std::isfinite(gt)) {
        throw Error("delta1: ground truth at index " + std::to_string(index) + " is not positive");
    }
}

bool hit_unchecked(double pred, double gt, const MetricsConfig& config) {
    if (config.mode == DeltaMode::literal) return std::abs(pred - gt) / gt < config.delta_threshold - 1.0;
    return std::max(pred / gt, gt / pred) < config.delta_threshold;
}

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

constexpr Domain kGroupOrder[] = {Domain::outdoor, Domain::mixed, Domain::indoor};

Domain domain_of_group(const std::string& label) {
    for (auto d : kGroupOrder)
        if (group_label(d) == label) return d;
    throw DataError("report: unknown group '" + label + "'");
}

}  // namespace

bool delta_hit(double pred, double gt, const MetricsConfig& config) {
    check_positive(pred, gt, 0);
    return hit_unchecked(pred, gt, config);
}

double delta1(std::span<const PredGt> pairs, const MetricsConfig& config) {
    config.validate();
    if (pairs.empty()) throw Error("delta1: empty prediction list");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        check_positive(pairs[i].pred, pairs[i].gt, i);
        if (hit_unchecked(pairs[i].pred, pairs[i].gt, config)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

EvalRecord score_query(const PixelQuery& q, double prediction, const MetricsConfig& config) {
    check_positive(prediction, q.gt_depth, 0);
    EvalRecord r;
    r.query = q;
    r.prediction = prediction;
    r.ratio = std::max(prediction / q.gt_depth, q.gt_depth / prediction);
    r.hit = hit_unchecked(prediction, q.gt_depth, config);
    return r;
}

std::string group_label(Domain d) {
    switch (d) {
        case Domain::outdoor: return "Outdoor";
        case Domain::mixed: return "Out+In";
        case Domain::indoor: return "Indoor";
    }
    return "?";
}

std::optional<double> Report::group_average(Domain d) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : datasets) {
        if (s.domain != d) continue;
        sum += s.delta1();
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

double Report::macro_average() const {
    if (datasets.empty()) throw Error("report: no datasets");
    double sum = 0.0;
    for (const auto& s : datasets) sum += s.delta1();
    return sum / static_cast<double>(datasets.size());
}

std::vector<DatasetScore> Report::ordered() const {
    std::vector<DatasetScore> out;
    for (auto d : kGroupOrder)
        for (const auto& s : datasets)
            if (s.domain == d) out.push_back(s);
    return out;
}

Report aggregate(std::span<const EvalRecord> records) {
    Report report;
    std::map<std::string, std::size_t> index;
    for (const auto& r : records) {
        auto [it, fresh] = index.emplace(r.query.dataset, report.datasets.size());
        if (fresh) report.datasets.push_back({r.query.dataset, r.query.domain, 0, 0});
        auto& s = report.datasets[it->second];
        if (s.domain != r.query.domain) {
            throw DataError("dataset '" + s.dataset + "' has queries from more than one domain");
        }
        ++s.total;
        if (r.hit) ++s.hits;
    }
    return report;
}

EvalResult evaluate_dense(const DensePredictor& predict, const Manifest& manifest,
                          std::span<const PixelQuery> queries, const MetricsConfig& config) {
    config.validate();
    if (queries.empty()) throw Error("evaluate_dense: no queries");
    EvalResult result;
    std::map<std::string, std::vector<std::size_t>> by_image;
    std::vector<std::string> order;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        auto& list = by_image[queries[i].sample_id];
        if (list.empty()) order.push_back(queries[i].sample_id);
        list.push_back(i);
    }
    std::vector<double> predictions(queries.size());
    for (const auto& id : order) {
        const auto& sample = manifest.find(id);
        const auto depth = predict(sample);
        ++result.predictor_calls;
        if (depth.rank() != 2) throw ShapeError("evaluate_dense: predictor must return [H,W]");
        for (auto i : by_image[id]) {
            const auto& q = queries[i];
            if (q.v >= depth.dim(0) || q.u >= depth.dim(1)) {
                throw DataError("query (" + std::to_string(q.u) + "," + std::to_string(q.v) + ") outside the " +
                                std::to_string(depth.dim(1)) + "x" + std::to_string(depth.dim(0)) +
                                " prediction for '" + id + "'");
            }
            predictions[i] = depth.data()[q.v * depth.dim(1) + q.u];
        }
    }
    for (std::size_t i = 0; i < queries.size(); ++i) {
        result.records.push_back(score_query(queries[i], predictions[i], config));
    }
    result.report = aggregate(result.records);
    return result;
}

EvalResult evaluate_dense(const DepthVlm& model, const Manifest& manifest, std::span<const PixelQuery> queries,
                          const MetricsConfig& config) {
    const auto prompt = text_task::dense_prompt();
    return evaluate_dense(
        [&](const Sample& s) {
            NoGradGuard no_grad;
            return model.forward(to_tensor(read_png(manifest.resolve(s.image))), prompt).depth;
        },
        manifest, queries, config);
}

EvalResult evaluate_constant(std::span<const PixelQuery> queries, double value, const MetricsConfig& config) {
    config.validate();
    if (!(value > 0.0)) throw Error("evaluate_constant: value must be > 0");
    if (queries.empty()) throw Error("evaluate_constant: no queries");
    EvalResult result;
    for (const auto& q : queries) result.records.push_back(score_query(q, value, config));
    result.report = aggregate(result.records);
    return result;
}

ReportFormat parse_report_format(const std::string& s) {
    if (s == "text-table" || s == "text") return ReportFormat::text_table;
    if (s == "csv") return ReportFormat::csv;
    if (s == "jsonl") return ReportFormat::jsonl;
    throw Error("unknown report format '" + s + "' (text-table, csv, jsonl)");
}

std::string emit_report(const Report& report, ReportFormat format) {
    if (report.datasets.empty()) throw Error("emit_report: empty report");
    const auto rows = report.ordered();
    std::ostringstream out;
    switch (format) {
        case ReportFormat::text_table: {
            std::size_t name_w = 7;
            for (const auto& s : rows) name_w = std::max(name_w, s.dataset.size());
            char line[256];
            std::snprintf(line, sizeof line, "%-8s  %-*s  %8s  %8s  %6s\n", "Group", static_cast<int>(name_w),
                          "Dataset", "Hits", "Total", "d1");
            out << line;
            for (const auto& s : rows) {
                std::snprintf(line, sizeof line, "%-8s  %-*s  %8zu  %8zu  %6s\n", group_label(s.domain).c_str(),
                              static_cast<int>(name_w), s.dataset.c_str(), s.hits, s.total, fmt3(s.delta1()).c_str());
                out << line;
            }
            for (auto d : kGroupOrder) {
                const auto avg = report.group_average(d);
                if (!avg) continue;
                std::snprintf(line, sizeof line, "%-8s  %-*s  %8s  %8s  %6s\n", group_label(d).c_str(),
                              static_cast<int>(name_w), "(mean)", "", "", fmt3(*avg).c_str());
                out << line;
            }
            std::snprintf(line, sizeof line, "%-8s  %-*s  %8s  %8s  %6s\n", "Avg.", static_cast<int>(name_w), "", "",
                          "", fmt3(report.macro_average()).c_str());
            out << line;
            break;
        }
        case ReportFormat::csv: {
            out << "kind,group,dataset,hits,total,delta1\n";
            for (const auto& s : rows) {
                out << "dataset," << group_label(s.domain) << ',' << s.dataset << ',' << s.hits << ',' << s.total
                    << ',' << fmt3(s.delta1()) << '\n';
            }
            for (auto d : kGroupOrder) {
                if (auto avg = report.group_average(d)) out << "group," << group_label(d) << ",,,," << fmt3(*avg) << '\n';
            }
            out << "macro,Avg.,,,," << fmt3(report.macro_average()) << '\n';
            break;
        }
        case ReportFormat::jsonl: {
            for (const auto& s : rows) {
                nlohmann::ordered_json j;
                j["kind"] = "dataset";
                j["group"] = group_label(s.domain);
                j["dataset"] = s.dataset;
                j["hits"] = s.hits;
                j["total"] = s.total;
                j["delta1"] = fmt3(s.delta1());
                out << j.dump() << '\n';
            }
            for (auto d : kGroupOrder) {
                if (auto avg = report.group_average(d)) {
                    nlohmann::ordered_json j;
                    j["kind"] = "group";
                    j["group"] = group_label(d);
                    j["delta1"] = fmt3(*avg);
                    out << j.dump() << '\n';
                }
            }
            nlohmann::ordered_json j;
            j["kind"] = "macro";
            j["group"] = "Avg.";
            j["delta1"] = fmt3(report.macro_average());
            out << j.dump() << '\n';
            break;
        }
    }
    return out.str();
}

Report parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "kind,group,dataset,hits,total,delta1") {
        throw DataError("report csv: missing header");
    }
    Report report;
    std::vector<std::vector<std::string>> summaries;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 6) throw DataError("report csv line " + std::to_string(lineno) + ": expected 6 fields");
        if (f[0] == "dataset") {
            DatasetScore s;
            s.domain = domain_of_group(f[1]);
            s.dataset = f[2];
            try {
                s.hits = std::stoul(f[3]);
                s.total = std::stoul(f[4]);
            } catch (const std::exception&) {
                throw DataError("report csv line " + std::to_string(lineno) + ": bad count");
            }
            if (s.total == 0 || s.hits > s.total) {
                throw DataError("report csv line " + std::to_string(lineno) + ": inconsistent counts");
            }
            if (fmt3(s.delta1()) != f[5]) {
                throw DataError("report csv line " + std::to_string(lineno) + ": delta1 does not match hits/total");
            }
            report.datasets.push_back(s);
        } else if (f[0] == "group" || f[0] == "macro") {
            summaries.push_back(f);
        } else {
            throw DataError("report csv line " + std::to_string(lineno) + ": unknown row kind '" + f[0] + "'");
        }
    }
    if (report.datasets.empty()) throw DataError("report csv: no dataset rows");
    for (const auto& f : summaries) {
        const double expected =
            f[0] == "macro" ? report.macro_average() : report.group_average(domain_of_group(f[1])).value_or(-1.0);
        if (fmt3(expected) != f[5]) throw DataError("report csv: summary row '" + f[1] + "' disagrees with data rows");
    }
    return report;
}

}  // namespace gvk
