#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gvk/data/manifest.hpp"
#include "gvk/head/model.hpp"

namespace gvk {

enum class DeltaMode {
    ratio,    // max(pred/gt, gt/pred) < threshold
    literal,  // |pred - gt| / gt < threshold - 1
};

struct MetricsConfig {
    double delta_threshold = 1.25;
    DeltaMode mode = DeltaMode::ratio;
    bool per_dataset = true;
    bool macro_average = true;

    void validate() const;
};

struct PredGt {
    double pred = 0.0;
    double gt = 0.0;
};

/// Throws if pred or gt is not strictly positive, naming the index.
bool delta_hit(double pred, double gt, const MetricsConfig& config = {});
double delta1(std::span<const PredGt> pairs, const MetricsConfig& config = {});

struct EvalRecord {
    PixelQuery query;
    double prediction = 0.0;
    double ratio = 0.0;
    bool hit = false;
};

EvalRecord score_query(const PixelQuery& q, double prediction, const MetricsConfig& config);

struct DatasetScore {
    std::string dataset;
    Domain domain = Domain::indoor;
    std::size_t hits = 0;
    std::size_t total = 0;

    double delta1() const { return static_cast<double>(hits) / static_cast<double>(total); }
    bool operator==(const DatasetScore&) const = default;
};

/// Table-style column groups: outdoor, out+in (mixed), indoor.
std::string group_label(Domain d);

struct Report {
    std::vector<DatasetScore> datasets;  // order of first appearance

    /// Unweighted mean of per-dataset delta1 within a group; nullopt if empty.
    std::optional<double> group_average(Domain d) const;
    /// Unweighted mean of per-dataset delta1.
    double macro_average() const;
    /// Datasets in column order: outdoor, out+in, indoor, each by appearance.
    std::vector<DatasetScore> ordered() const;
    bool operator==(const Report&) const = default;
};

/// Aggregates per dataset. A dataset whose records disagree on domain is an
/// error.
Report aggregate(std::span<const EvalRecord> records);

/// Returns depth [H, W] for the sample's image; called once per image.
using DensePredictor = std::function<Tensor(const Sample&)>;

struct EvalResult {
    Report report;
    std::vector<EvalRecord> records;
    std::size_t predictor_calls = 0;
};

/// One prediction per distinct image referenced by the queries, then a read
/// of the dense map at every query pixel.
EvalResult evaluate_dense(const DensePredictor& predict, const Manifest& manifest,
                          std::span<const PixelQuery> queries, const MetricsConfig& config = {});
/// Loads each image once and runs one model forward with the dense prompt.
EvalResult evaluate_dense(const DepthVlm& model, const Manifest& manifest, std::span<const PixelQuery> queries,
                          const MetricsConfig& config = {});

EvalResult evaluate_constant(std::span<const PixelQuery> queries, double value, const MetricsConfig& config = {});

enum class ReportFormat { text_table, csv, jsonl };
ReportFormat parse_report_format(const std::string& s);

/// Stable layout; delta1 values printed with 3 decimals.
std::string emit_report(const Report& report, ReportFormat format);
/// Inverse of the csv form; summary rows are checked against the data rows.
Report parse_report_csv(const std::string& text);

}  // namespace gvk
