#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gvk/tensor/tensor.hpp"

namespace gvk {

/// Input data problem (bad file, bad record). Distinct from caller misuse.
class DataError : public Error {
public:
    using Error::Error;
};

struct CameraIntrinsics {
    double fx = 0.0, fy = 0.0;
    double cx = 0.0, cy = 0.0;

    static constexpr double kIsotropyTolerance = 0.05;

    void validate() const;
    /// |fx - fy| / fx within tolerance.
    bool eligible() const;
    bool operator==(const CameraIntrinsics&) const = default;
};

/// `mixed` marks datasets that span indoor and outdoor scenes.
enum class Domain { indoor, outdoor, mixed };
enum class Split { train, eval };

std::string to_string(Domain d);
std::string to_string(Split s);
Domain parse_domain(const std::string& s);
Split parse_split(const std::string& s);

struct Sample {
    std::string id;
    std::string image;  // path as written in the manifest
    std::string depth;
    CameraIntrinsics intrinsics;
    Domain domain = Domain::indoor;
    std::string dataset;
    Split split = Split::train;

    bool operator==(const Sample&) const = default;
};

struct Manifest {
    std::vector<Sample> entries;
    std::optional<double> canonical_focal;
    std::uint64_t seed = 0;
    /// Relative paths in entries resolve against this directory.
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::string& p) const;
    /// Unique ids, nonempty dataset names, valid intrinsics; and every entry
    /// focal-normalized when canonical_focal is set.
    void validate() const;
    /// Datasets in order of first appearance.
    std::vector<std::string> datasets() const;
    const Sample& find(const std::string& id) const;
};

/// One JSON object per line with fields id, image, depth, fx, fy, cx, cy,
/// domain, dataset, split in that order.
std::string manifest_to_jsonl(const Manifest& manifest);
Manifest manifest_from_jsonl(const std::string& text, const std::filesystem::path& base_dir = {});
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);
/// Loads and validates; with `check_files`, every referenced file must exist.
Manifest load_manifest(const std::filesystem::path& path, bool check_files = true);

struct PixelQuery {
    std::string sample_id;
    std::string dataset;
    Domain domain = Domain::indoor;
    std::size_t u = 0, v = 0;  // column, row
    double gt_depth = 0.0;

    bool operator==(const PixelQuery&) const = default;
};

std::string queries_to_jsonl(const std::vector<PixelQuery>& queries);
std::vector<PixelQuery> queries_from_jsonl(const std::string& text);
void save_queries(const std::filesystem::path& path, const std::vector<PixelQuery>& queries);
std::vector<PixelQuery> load_queries(const std::filesystem::path& path);

}  // namespace gvk
