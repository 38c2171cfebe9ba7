#include "gvk/data/manifest.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gvk {

using ojson = nlohmann::ordered_json;

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
        throw DataError("intrinsics: focal lengths must be finite and > 0");
    }
    if (!std::isfinite(cx) || !std::isfinite(cy)) throw DataError("intrinsics: principal point must be finite");
}

bool CameraIntrinsics::eligible() const { return std::abs(fx - fy) / fx <= kIsotropyTolerance; }

std::string to_string(Domain d) {
    switch (d) {
        case Domain::indoor: return "indoor";
        case Domain::outdoor: return "outdoor";
        case Domain::mixed: return "mixed";
    }
    return "?";
}

std::string to_string(Split s) { return s == Split::train ? "train" : "eval"; }

Domain parse_domain(const std::string& s) {
    if (s == "indoor") return Domain::indoor;
    if (s == "outdoor") return Domain::outdoor;
    if (s == "mixed") return Domain::mixed;
    throw DataError("unknown domain '" + s + "'");
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "eval") return Split::eval;
    throw DataError("unknown split '" + s + "'");
}

std::filesystem::path Manifest::resolve(const std::string& p) const {
    std::filesystem::path path(p);
    if (path.is_absolute() || base_dir.empty()) return path;
    return base_dir / path;
}

void Manifest::validate() const {
    std::set<std::string> ids;
    for (const auto& s : entries) {
        if (s.id.empty()) throw DataError("manifest: empty id");
        if (!ids.insert(s.id).second) throw DataError("manifest: duplicate id '" + s.id + "'");
        if (s.dataset.empty()) throw DataError("manifest: empty dataset for '" + s.id + "'");
        s.intrinsics.validate();
        if (canonical_focal && std::abs(s.intrinsics.fx - *canonical_focal) > 1e-9 * *canonical_focal) {
            throw DataError("manifest: '" + s.id + "' is not normalized to f_c");
        }
    }
}

std::vector<std::string> Manifest::datasets() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& s : entries)
        if (seen.insert(s.dataset).second) out.push_back(s.dataset);
    return out;
}

const Sample& Manifest::find(const std::string& id) const {
    for (const auto& s : entries)
        if (s.id == id) return s;
    throw DataError("manifest: no sample '" + id + "'");
}

std::string manifest_to_jsonl(const Manifest& manifest) {
    std::string out;
    for (const auto& s : manifest.entries) {
        ojson j;
        j["id"] = s.id;
        j["image"] = s.image;
        j["depth"] = s.depth;
        j["fx"] = s.intrinsics.fx;
        j["fy"] = s.intrinsics.fy;
        j["cx"] = s.intrinsics.cx;
        j["cy"] = s.intrinsics.cy;
        j["domain"] = to_string(s.domain);
        j["dataset"] = s.dataset;
        j["split"] = to_string(s.split);
        out += j.dump();
        out += '\n';
    }
    return out;
}

namespace {

template <typename Fn>
void for_each_json_line(const std::string& text, const std::string& what, Fn&& fn) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            fn(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(what + " line " + std::to_string(lineno) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(what + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

}  // namespace

Manifest manifest_from_jsonl(const std::string& text, const std::filesystem::path& base_dir) {
    Manifest m;
    m.base_dir = base_dir;
    static const std::set<std::string> kFields = {"id", "image", "depth", "fx", "fy", "cx",
                                                  "cy", "domain", "dataset", "split"};
    for_each_json_line(text, "manifest", [&](const nlohmann::json& j) {
        if (!j.is_object()) throw DataError("expected an object");
        for (const auto& [key, _] : j.items())
            if (!kFields.count(key)) throw DataError("unknown field '" + key + "'");
        Sample s;
        s.id = j.at("id").get<std::string>();
        s.image = j.at("image").get<std::string>();
        s.depth = j.at("depth").get<std::string>();
        s.intrinsics = {j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                        j.at("cy").get<double>()};
        s.domain = parse_domain(j.at("domain").get<std::string>());
        s.dataset = j.at("dataset").get<std::string>();
        s.split = parse_split(j.at("split").get<std::string>());
        m.entries.push_back(std::move(s));
    });
    return m;
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    write_text(path, manifest_to_jsonl(manifest));
}

Manifest load_manifest(const std::filesystem::path& path, bool check_files) {
    auto m = manifest_from_jsonl(read_text(path), path.parent_path());
    m.validate();
    if (check_files) {
        for (const auto& s : m.entries) {
            for (const auto& f : {s.image, s.depth}) {
                if (!std::filesystem::exists(m.resolve(f))) {
                    throw DataError("manifest: '" + s.id + "' references missing file " + m.resolve(f).string());
                }
            }
        }
    }
    return m;
}

std::string queries_to_jsonl(const std::vector<PixelQuery>& queries) {
    std::string out;
    for (const auto& q : queries) {
        ojson j;
        j["id"] = q.sample_id;
        j["dataset"] = q.dataset;
        j["domain"] = to_string(q.domain);
        j["u"] = q.u;
        j["v"] = q.v;
        j["gt_depth"] = q.gt_depth;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<PixelQuery> queries_from_jsonl(const std::string& text) {
    std::vector<PixelQuery> out;
    for_each_json_line(text, "queries", [&](const nlohmann::json& j) {
        PixelQuery q;
        q.sample_id = j.at("id").get<std::string>();
        q.dataset = j.at("dataset").get<std::string>();
        q.domain = parse_domain(j.at("domain").get<std::string>());
        q.u = j.at("u").get<std::size_t>();
        q.v = j.at("v").get<std::size_t>();
        q.gt_depth = j.at("gt_depth").get<double>();
        if (!(q.gt_depth > 0.0)) throw DataError("gt_depth must be > 0");
        out.push_back(std::move(q));
    });
    return out;
}

void save_queries(const std::filesystem::path& path, const std::vector<PixelQuery>& queries) {
    write_text(path, queries_to_jsonl(queries));
}

std::vector<PixelQuery> load_queries(const std::filesystem::path& path) { return queries_from_jsonl(read_text(path)); }

}  // namespace gvk
