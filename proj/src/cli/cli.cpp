#include "gvk/cli/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "gvk/data/image.hpp"
#include "gvk/data/manifest.hpp"
#include "gvk/data/normalize.hpp"
#include "gvk/data/sampling.hpp"
#include "gvk/data/synth.hpp"
#include "gvk/encoder/feature_dump.hpp"
#include "gvk/eval/marker.hpp"
#include "gvk/eval/metrics.hpp"
#include "gvk/eval/point_query.hpp"
#include "gvk/head/model.hpp"
#include "gvk/tensor/checkpoint.hpp"
#include "gvk/train/text_task.hpp"
#include "gvk/train/trainer.hpp"
#include "gvk/util/parallel.hpp"
#include "json_config.hpp"

namespace gvk::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

class UsageError : public Error {
public:
    using Error::Error;
};

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << text;
    if (!f) throw DataError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path.string());
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

// Writes results to a file, or to `out` when the path is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
    } else {
        write_text(path, text);
    }
}

// Entry paths rewritten relative to the directory `path` will live in.
void save_manifest_at(const fs::path& path, Manifest m) {
    const auto dir = fs::absolute(path).parent_path();
    for (auto& s : m.entries) {
        for (auto* p : {&s.image, &s.depth}) {
            *p = fs::absolute(m.resolve(*p)).lexically_normal().lexically_proximate(dir).generic_string();
        }
    }
    m.base_dir = dir;
    fs::create_directories(dir);
    save_manifest(path, m);
}

// ---- model configuration ------------------------------------------------

struct ModelFlags {
    std::string preset = "desk";
    std::string head = "lightweight_dpt";
    std::size_t patch = 0, merge = 0, vit_layers = 0, vit_dim = 0, vit_heads = 0;
    std::size_t llm_layers = 0, llm_dim = 0, llm_heads = 0, fusion = 0, output_scale = 0;
    std::vector<CLI::Option*> options;
};

void add_model_flags(CLI::App* sub, ModelFlags& f) {
    f.options.push_back(sub->add_option("--preset", f.preset, "Model size preset: desk (CPU scale) or base")
                            ->check(CLI::IsMember({"desk", "base"})));
    f.options.push_back(sub->add_option("--head", f.head, "Head variant")
                            ->check(CLI::IsMember({"lightweight_dpt", "original_dpt", "mlp2", "mlp2_multiscale"})));
    auto num = [&](const char* name, std::size_t& v, const char* what) {
        auto* o = sub->add_option(name, v, what)->check(CLI::PositiveNumber);
        o->default_str("");
        f.options.push_back(o);
    };
    num("--patch", f.patch, "ViT patch size (overrides preset)");
    num("--merge", f.merge, "Token merge factor");
    num("--vit-layers", f.vit_layers, "ViT layers");
    num("--vit-dim", f.vit_dim, "ViT width");
    num("--vit-heads", f.vit_heads, "ViT attention heads");
    num("--llm-layers", f.llm_layers, "LLM layers");
    num("--llm-dim", f.llm_dim, "LLM width");
    num("--llm-heads", f.llm_heads, "LLM attention heads");
    num("--fusion", f.fusion, "Head fusion channels");
    num("--output-scale", f.output_scale, "Input pixels per token for feature-only decoding");
}

bool model_flags_given(const ModelFlags& f) {
    for (const auto* o : f.options)
        if (o->count() > 0) return true;
    return false;
}

ModelConfig resolve_model(const ModelFlags& f, std::uint64_t seed) {
    const auto variant = parse_head_variant(f.head);
    ModelConfig c;
    if (f.preset == "desk") {
        c = desk_model_config(variant);
    } else {
        c.head = DepthHeadConfig::for_variant(variant);
    }
    auto set = [](std::size_t given, std::size_t& field) {
        if (given != 0) field = given;
    };
    set(f.patch, c.encoder.patch_size);
    set(f.merge, c.encoder.merge_factor);
    set(f.vit_layers, c.encoder.vit_layers);
    set(f.vit_dim, c.encoder.vit_dim);
    set(f.vit_heads, c.encoder.vit_heads);
    set(f.llm_layers, c.encoder.llm_layers);
    set(f.llm_dim, c.encoder.llm_dim);
    set(f.llm_heads, c.encoder.llm_heads);
    set(f.fusion, c.head.fusion_channels);
    set(f.output_scale, c.head.output_scale);
    c.encoder.seed = seed;
    c.head.seed = seed + 1;
    try {
        c.encoder.validate();
        c.head.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    return c;
}

ordered_json model_to_json(const ModelConfig& c) {
    ordered_json j;
    const auto& e = c.encoder;
    j["patch"] = e.patch_size;
    j["merge"] = e.merge_factor;
    j["vit_layers"] = e.vit_layers;
    j["vit_dim"] = e.vit_dim;
    j["vit_heads"] = e.vit_heads;
    j["llm_layers"] = e.llm_layers;
    j["llm_dim"] = e.llm_dim;
    j["llm_heads"] = e.llm_heads;
    j["mlp_ratio"] = e.mlp_ratio;
    j["tap_layers"] = e.tap_layers;
    j["vocab"] = e.vocab_size;
    j["share_tap_projector"] = e.share_tap_projector;
    j["encoder_seed"] = e.seed;
    const auto& h = c.head;
    j["head"] = to_string(h.variant);
    j["fusion"] = h.fusion_channels;
    j["level_scales"] = h.level_scales;
    j["output_scale"] = h.output_scale;
    j["output_hidden"] = h.output_hidden;
    j["head_seed"] = h.seed;
    return j;
}

ModelConfig model_from_json(const ordered_json& j) {
    ModelConfig c;
    try {
        auto& e = c.encoder;
        e.patch_size = j.at("patch");
        e.merge_factor = j.at("merge");
        e.vit_layers = j.at("vit_layers");
        e.vit_dim = j.at("vit_dim");
        e.vit_heads = j.at("vit_heads");
        e.llm_layers = j.at("llm_layers");
        e.llm_dim = j.at("llm_dim");
        e.llm_heads = j.at("llm_heads");
        e.mlp_ratio = j.at("mlp_ratio");
        e.tap_layers = j.at("tap_layers");
        e.vocab_size = j.at("vocab");
        e.share_tap_projector = j.at("share_tap_projector");
        e.seed = j.at("encoder_seed");
        auto& h = c.head;
        h.variant = parse_head_variant(j.at("head"));
        h.fusion_channels = j.at("fusion");
        h.level_scales = j.at("level_scales");
        h.output_scale = j.at("output_scale");
        h.output_hidden = j.at("output_hidden");
        h.seed = j.at("head_seed");
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model config: ") + e.what());
    }
    c.encoder.validate();
    c.head.validate();
    return c;
}

fs::path model_sidecar(const fs::path& checkpoint) { return fs::path(checkpoint.string() + ".json"); }

void save_model_sidecar(const fs::path& checkpoint, const ModelConfig& c) {
    write_text(model_sidecar(checkpoint), model_to_json(c).dump(2) + "\n");
}

ModelConfig load_model_sidecar(const fs::path& checkpoint) {
    const auto path = model_sidecar(checkpoint);
    if (!fs::exists(path)) throw DataError("missing model config " + path.string() + " next to the checkpoint");
    try {
        return model_from_json(ordered_json::parse(read_text(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

// Model with parameters restored from a trainer checkpoint.
std::unique_ptr<DepthVlm> load_trained_model(const fs::path& checkpoint) {
    auto model = std::make_unique<DepthVlm>(load_model_sidecar(checkpoint));
    load_train_state(checkpoint, *model);
    return model;
}

MetricsConfig metrics_config(double threshold, bool literal) {
    MetricsConfig c;
    c.delta_threshold = threshold;
    c.mode = literal ? DeltaMode::literal : DeltaMode::ratio;
    return c;
}

void add_metric_flags(CLI::App* sub, double& threshold, bool& literal, std::string& format) {
    sub->add_option("--delta", threshold, "delta1 threshold")->check(CLI::Range(1.0 + 1e-9, 1e9));
    sub->add_flag("--literal", literal, "Score |pred - gt| / gt < threshold - 1 instead of the max ratio");
    sub->add_option("--format", format, "Report format")->check(CLI::IsMember({"text-table", "csv", "jsonl"}));
}

std::size_t checked_jobs(std::size_t jobs) {
    if (jobs == 0) throw UsageError("--jobs must be at least 1");
    return jobs;
}

std::vector<SceneFamily> parse_families(const std::vector<std::string>& names) {
    std::vector<SceneFamily> out;
    for (const auto& n : names) {
        try {
            out.push_back(parse_scene_family(n));
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
    }
    if (out.empty()) throw UsageError("--families needs at least one family");
    return out;
}

// ---- subcommands --------------------------------------------------------

struct NormalizeArgs {
    std::string in, out, out_dir;
    double fc = kDefaultCanonicalFocal;
    std::size_t jobs = default_jobs();
};

int run_normalize(const NormalizeArgs& a, std::ostream& out) {
    const auto manifest = load_manifest(a.in);
    fs::path dir = a.out_dir;
    if (dir.empty()) {
        const fs::path o(a.out);
        dir = o.parent_path() / (o.stem().string() + "_data");
    }
    const auto norm = normalize_manifest(manifest, a.fc, dir, checked_jobs(a.jobs));
    save_manifest_at(a.out, norm);
    out << "normalized " << norm.entries.size() << " entries to f_c=" << a.fc << " -> " << a.out << "\n";
    return kExitOk;
}

struct SynthArgs {
    std::string out_dir, manifest, domain = "indoor", dataset = "synthetic", split = "train", prefix = "syn";
    std::vector<std::string> families{"fronto_plane", "slanted_plane", "spheres"};
    std::size_t count = 32, width = 64, height = 64;
    double focal = 1000.0, min_depth = 0.0, max_depth = 0.0;
    std::uint64_t seed = 0;
    bool append = false;
};

int run_synth(const SynthArgs& a, const CLI::App& sub, std::ostream& out) {
    SynthSetSpec spec;
    spec.count = a.count;
    spec.width = a.width;
    spec.height = a.height;
    spec.focal = a.focal;
    spec.domain = parse_domain(a.domain);
    spec.dataset = a.dataset;
    spec.split = parse_split(a.split);
    spec.families = parse_families(a.families);
    spec.id_prefix = a.prefix;
    const bool has_min = sub.get_option("--min-depth")->count() > 0;
    const bool has_max = sub.get_option("--max-depth")->count() > 0;
    if (has_min != has_max) throw UsageError("--min-depth and --max-depth go together");
    if (has_min) {
        if (!(a.min_depth > 0.0 && a.max_depth > a.min_depth)) throw UsageError("need 0 < --min-depth < --max-depth");
        spec.range = DepthRange{a.min_depth, a.max_depth};
    }
    auto scenes = generate_synthetic_set(spec, a.seed);
    auto written = write_synthetic_set(scenes, a.out_dir);
    const fs::path manifest_path = a.manifest.empty() ? fs::path(a.out_dir) / "manifest.jsonl" : fs::path(a.manifest);
    Manifest result = written;
    if (a.append && fs::exists(manifest_path)) {
        auto existing = load_manifest(manifest_path, false);
        for (auto& s : existing.entries) {
            s.image = existing.resolve(s.image).string();
            s.depth = existing.resolve(s.depth).string();
        }
        for (auto& s : result.entries) {
            s.image = result.resolve(s.image).string();
            s.depth = result.resolve(s.depth).string();
        }
        existing.entries.insert(existing.entries.end(), result.entries.begin(), result.entries.end());
        existing.base_dir.clear();
        existing.validate();
        result = std::move(existing);
    }
    save_manifest_at(manifest_path, result);
    out << "wrote " << scenes.size() << " scenes (" << a.dataset << ", " << a.domain << ") -> "
        << manifest_path.string() << "\n";
    return kExitOk;
}

struct SampleArgs {
    std::string manifest, out;
    std::size_t per_image = 10, images_per_dataset = 1000, jobs = default_jobs();
    std::uint64_t seed = 0;
};

int run_sample(const SampleArgs& a, std::ostream& out, std::ostream& err) {
    const auto manifest = load_manifest(a.manifest);
    SamplingConfig cfg;
    cfg.per_image = a.per_image;
    cfg.images_per_dataset = a.images_per_dataset;
    cfg.seed = a.seed;
    const auto result = sample_eval_pixels(manifest, cfg, checked_jobs(a.jobs));
    for (const auto& s : result.shortfalls) {
        err << "shortfall: " << s.dataset << "/" << s.sample_id << " missing " << s.missing << " (" << s.reason
            << ")\n";
    }
    if (result.queries.empty()) throw DataError("sample-pixels: no eval-split pixels could be drawn");
    emit(a.out, queries_to_jsonl(result.queries), out);
    if (!a.out.empty() && a.out != "-") {
        out << "sampled " << result.queries.size() << " queries (" << result.shortfall_count()
            << " short) -> " << a.out << "\n";
    }
    return kExitOk;
}

struct TrainArgs {
    int stage = 1;
    std::string manifest, out, resume, log, split = "train";
    std::size_t steps = 1000, batch = 8;
    std::uint64_t seed = 0;
    double lr = 0.0, warmup = -1.0, lambda = -1.0, alpha = -1.0, clip = 1.0;
    bool stage2_only = false;
    ModelFlags model;
};

int run_train(const TrainArgs& a, const CLI::App& sub, std::ostream& out, std::ostream& err) {
    const auto stage = a.stage == 1 ? Stage::one : Stage::two;
    auto spec = configure_default(stage, a.steps);
    spec.batch_size = a.batch;
    spec.clip_norm = a.clip;
    if (sub.get_option("--lr")->count() > 0) spec.schedule.base_lr = a.lr;
    if (sub.get_option("--warmup")->count() > 0) spec.schedule.warmup_ratio = a.warmup;
    if (sub.get_option("--lambda")->count() > 0) spec.loss.lambda = a.lambda;
    if (sub.get_option("--alpha")->count() > 0) spec.loss.alpha = a.alpha;
    try {
        spec.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }

    std::unique_ptr<DepthVlm> model;
    TrainState state;
    if (!a.resume.empty()) {
        if (model_flags_given(a.model)) throw UsageError("model flags cannot be combined with --resume");
        model = std::make_unique<DepthVlm>(load_model_sidecar(a.resume));
        state = load_train_state(a.resume, *model);
        if (state.seed != a.seed) {
            throw UsageError("--seed " + std::to_string(a.seed) + " differs from the checkpoint seed " +
                             std::to_string(state.seed));
        }
    } else {
        model = std::make_unique<DepthVlm>(resolve_model(a.model, a.seed));
        state.seed = a.seed;
    }
    if (stage == Stage::two && !state.stage1_done && !a.stage2_only) {
        throw UsageError("stage 2 needs --resume from a finished stage-1 checkpoint (or --stage2-only)");
    }

    const auto manifest = load_manifest(a.manifest);
    const auto data = load_examples(manifest, parse_split(a.split));
    if (data.empty()) throw DataError("train: manifest has no '" + a.split + "' entries");

    std::ofstream log;
    if (!a.log.empty()) {
        if (fs::path(a.log).has_parent_path()) fs::create_directories(fs::path(a.log).parent_path());
        log.open(a.log, std::ios::binary);
        if (!log) throw DataError("cannot write " + a.log);
    }
    RunOptions options;
    options.allow_stage2_only = a.stage2_only;
    options.on_record = [&](const TrainRecord& r) {
        if (log.is_open()) log << to_jsonl(r) << "\n";
        if (r.step == 1 || r.step % 50 == 0 || r.step == spec.steps) {
            err << "stage " << r.stage << " step " << r.step << "/" << spec.steps << " lr " << r.lr << " loss "
                << r.joint << " ema " << r.ema << "\n";
        }
    };
    try {
        run_stage(spec, *model, data, state, options);
    } catch (const TrainingAborted&) {
        save_train_state(a.out + ".aborted", *model, state);
        save_model_sidecar(a.out + ".aborted", model->config());
        throw;
    }
    save_train_state(a.out, *model, state);
    save_model_sidecar(a.out, model->config());
    out << "stage " << a.stage << " finished at step " << state.step << ", loss ema " << state.loss_ema << " -> "
        << a.out << "\n";
    return kExitOk;
}

struct EvalArgs {
    std::string checkpoint, manifest, queries, out, records, format = "text-table", mode = "dense";
    double delta = 1.25;
    bool literal = false;
};

std::string records_jsonl(const std::vector<EvalRecord>& records) {
    std::string s;
    for (const auto& r : records) {
        ordered_json j;
        j["id"] = r.query.sample_id;
        j["dataset"] = r.query.dataset;
        j["u"] = r.query.u;
        j["v"] = r.query.v;
        j["gt_depth"] = r.query.gt_depth;
        j["prediction"] = r.prediction;
        j["ratio"] = r.ratio;
        j["hit"] = r.hit;
        s += j.dump() + "\n";
    }
    return s;
}

int run_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    const auto cfg = metrics_config(a.delta, a.literal);
    const auto model = load_trained_model(a.checkpoint);
    const auto manifest = load_manifest(a.manifest);
    const auto queries = load_queries(a.queries);
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = a.mode == "point" ? evaluate_point_queries(*model, manifest, queries, cfg)
                                          : evaluate_dense(*model, manifest, queries, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    err << "eval: " << queries.size() << " queries, " << model->forward_count() << " model forwards (" << a.mode
        << "), " << secs << " s\n";
    if (!a.records.empty()) write_text(a.records, records_jsonl(result.records));
    emit(a.out, emit_report(result.report, parse_report_format(a.format)), out);
    return kExitOk;
}

struct BaselineArgs {
    std::string queries, out, format = "text-table";
    double value = 2.0, delta = 1.25;
    bool literal = false;
};

int run_baseline(const BaselineArgs& a, std::ostream& out) {
    const auto queries = load_queries(a.queries);
    const auto result = evaluate_constant(queries, a.value, metrics_config(a.delta, a.literal));
    emit(a.out, emit_report(result.report, parse_report_format(a.format)), out);
    return kExitOk;
}

struct MarkerArgs {
    std::string image, out, manifest, queries, out_dir;
    std::size_t u = 0, v = 0;
    int length = 20, stroke = 3, max_edge = 1024;
};

int run_marker(const MarkerArgs& a, const CLI::App& sub, std::ostream& out) {
    MarkerStyle style{a.length, a.stroke, a.max_edge};
    const bool single = !a.image.empty();
    const bool batch = !a.queries.empty();
    if (single == batch) throw UsageError("marker: give either --image/--u/--v/--out or --manifest/--queries/--out-dir");
    if (single) {
        if (a.out.empty() || sub.get_option("--u")->count() == 0 || sub.get_option("--v")->count() == 0) {
            throw UsageError("marker: --image needs --u, --v and --out");
        }
        PixelQuery q;
        q.sample_id = fs::path(a.image).stem().string();
        q.u = a.u;
        q.v = a.v;
        const auto probe = render_marker(read_png(a.image), q, style);
        write_png(a.out, probe.image);
        ordered_json j;
        j["image"] = a.out;
        j["u"] = probe.u;
        j["v"] = probe.v;
        j["scale"] = probe.scale;
        j["direction"] = to_string(probe.direction);
        j["prompt"] = probe.prompt;
        out << j.dump() << "\n";
        return kExitOk;
    }
    if (a.manifest.empty() || a.out_dir.empty()) throw UsageError("marker: --queries needs --manifest and --out-dir");
    const auto manifest = load_manifest(a.manifest);
    const auto queries = load_queries(a.queries);
    fs::create_directories(a.out_dir);
    std::string index;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& q = queries[i];
        const auto& s = manifest.find(q.sample_id);
        const auto probe = render_marker(read_png(manifest.resolve(s.image)), q, style);
        char name[32];
        std::snprintf(name, sizeof name, "%06zu.png", i);
        write_png(fs::path(a.out_dir) / name, probe.image);
        ordered_json j;
        j["image"] = name;
        j["id"] = q.sample_id;
        j["dataset"] = q.dataset;
        j["u"] = probe.u;
        j["v"] = probe.v;
        j["scale"] = probe.scale;
        j["direction"] = to_string(probe.direction);
        j["gt_depth"] = q.gt_depth;
        j["prompt"] = probe.prompt;
        index += j.dump() + "\n";
    }
    write_text(fs::path(a.out_dir) / "probes.jsonl", index);
    out << "rendered " << queries.size() << " probes -> " << a.out_dir << "\n";
    return kExitOk;
}

struct ReportArgs {
    std::string in, out, format = "text-table";
};

int run_report(const ReportArgs& a, std::ostream& out) {
    const auto report = parse_report_csv(read_text(a.in));
    emit(a.out, emit_report(report, parse_report_format(a.format)), out);
    return kExitOk;
}

struct DumpArgs {
    std::string in, out, checkpoint, depth_out, export_image, image_id;
};

int run_dump(const DumpArgs& a, std::ostream& out) {
    if (a.in.empty() == a.export_image.empty()) {
        throw UsageError("dump-roundtrip: give exactly one of --in or --export-image");
    }
    std::vector<std::uint8_t> bytes;
    if (!a.export_image.empty()) {
        if (a.checkpoint.empty()) throw UsageError("--export-image needs --checkpoint");
        const auto model = load_trained_model(a.checkpoint);
        NoGradGuard no_grad;
        const auto img = to_tensor(read_png(a.export_image));
        const auto states = model->encoder().encode(img, text_task::dense_prompt());
        const auto id = a.image_id.empty() ? fs::path(a.export_image).stem().string() : a.image_id;
        bytes = encode_feature_dump(make_feature_dump(states, model->config().encoder, id));
    } else {
        bytes = io::read_file(a.in);
    }
    const auto dump = decode_feature_dump(bytes);
    const auto again = encode_feature_dump(dump);
    if (again != bytes) throw DataError("dump-roundtrip: re-encoding does not reproduce the input bytes");
    if (!a.out.empty()) io::write_file(a.out, again);

    const auto& m = dump.meta;
    const auto& grid = dump.states.llm_image;
    ordered_json j;
    j["image_id"] = m.image_id;
    j["image_h"] = m.image_h;
    j["image_w"] = m.image_w;
    j["grid_h"] = grid.grid_h;
    j["grid_w"] = grid.grid_w;
    j["dim"] = m.dim;
    j["tap_layers"] = m.tap_layers;
    j["model_id"] = m.model_id;
    j["bytes"] = bytes.size();
    j["roundtrip"] = "identical";
    if (!a.checkpoint.empty()) {
        const auto model = load_trained_model(a.checkpoint);
        NoGradGuard no_grad;
        const auto depth = model->decode_states(dump.states);
        const auto d = depth.data();
        j["depth_h"] = depth.dim(0);
        j["depth_w"] = depth.dim(1);
        j["depth_min"] = *std::min_element(d.begin(), d.end());
        j["depth_max"] = *std::max_element(d.begin(), d.end());
        if (!a.depth_out.empty()) write_depth(a.depth_out, DepthMap(depth));
    }
    out << j.dump() << "\n";
    return kExitOk;
}

std::string first_positional(const std::vector<std::string>& args) {
    for (const auto& s : args)
        if (!s.empty() && s[0] != '-') return s;
    return {};
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dense metric depth from a vision-language backbone: data prep, training, evaluation", "gvk"};
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->always_capture_default();
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.config_formatter(std::make_shared<JsonConfig>(first_positional(args)));
    app.set_config("--config", "", "JSON file of flag values; flags given on the command line take precedence");

    NormalizeArgs na;
    auto* normalize = app.add_subcommand("normalize", "Resample a manifest to a canonical focal length");
    normalize->add_option("--in", na.in, "Input manifest (JSON lines)")->required();
    normalize->add_option("--out", na.out, "Output manifest")->required();
    normalize->add_option("--fc", na.fc, "Canonical focal length in pixels")->check(CLI::PositiveNumber);
    normalize->add_option("--out-dir", na.out_dir, "Directory for resampled files (default: <out stem>_data)");
    normalize->add_option("--jobs", na.jobs, "Worker threads");

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate analytic-depth synthetic scenes");
    synth->add_option("--out-dir", sa.out_dir, "Directory for images and depth")->required();
    synth->add_option("--manifest", sa.manifest, "Manifest path (default: <out-dir>/manifest.jsonl)");
    synth->add_option("--seed", sa.seed, "Random seed")->required();
    synth->add_option("--count", sa.count, "Number of scenes")->check(CLI::PositiveNumber);
    synth->add_option("--width", sa.width, "Image width")->check(CLI::PositiveNumber);
    synth->add_option("--height", sa.height, "Image height")->check(CLI::PositiveNumber);
    synth->add_option("--focal", sa.focal, "Focal length in pixels")->check(CLI::PositiveNumber);
    synth->add_option("--domain", sa.domain, "indoor, outdoor or mixed")
        ->check(CLI::IsMember({"indoor", "outdoor", "mixed"}));
    synth->add_option("--dataset", sa.dataset, "Dataset name");
    synth->add_option("--split", sa.split, "train or eval")->check(CLI::IsMember({"train", "eval"}));
    synth->add_option("--families", sa.families, "Scene families, cycled")
        ->check(CLI::IsMember({"fronto_plane", "slanted_plane", "spheres"}));
    synth->add_option("--min-depth", sa.min_depth, "Depth range lower bound in meters (default: by domain)");
    synth->add_option("--max-depth", sa.max_depth, "Depth range upper bound in meters");
    synth->add_option("--id-prefix", sa.prefix, "Sample id prefix");
    synth->add_flag("--append", sa.append, "Add to an existing manifest instead of replacing it");

    SampleArgs pa;
    auto* sample = app.add_subcommand("sample-pixels", "Draw evaluation pixels from eval-split entries");
    sample->add_option("--manifest", pa.manifest, "Manifest")->required();
    sample->add_option("--out", pa.out, "Query file (JSON lines); stdout when omitted");
    sample->add_option("--seed", pa.seed, "Random seed")->required();
    sample->add_option("--per-image", pa.per_image, "Pixels per drawn image")->check(CLI::PositiveNumber);
    sample->add_option("--images-per-dataset", pa.images_per_dataset,
                       "Image draws per dataset (0: every image once)");
    sample->add_option("--jobs", pa.jobs, "Worker threads");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Run stage 1 (head only) or stage 2 (ViT frozen)");
    train->add_option("--stage", ta.stage, "1 or 2")->required()->check(CLI::IsMember({1, 2}));
    train->add_option("--manifest", ta.manifest, "Training manifest")->required();
    train->add_option("--out", ta.out, "Checkpoint to write")->required();
    train->add_option("--seed", ta.seed, "Seed for initialization, batching and pixel picks")->required();
    train->add_option("--steps", ta.steps, "Optimizer steps in this stage")->check(CLI::PositiveNumber);
    train->add_option("--batch", ta.batch, "Batch size")->check(CLI::PositiveNumber);
    train->add_option("--resume", ta.resume, "Checkpoint to continue from (same stage) or to start stage 2 from");
    train->add_option("--log", ta.log, "Metrics log (JSON lines)");
    train->add_option("--split", ta.split, "Manifest split to train on")->check(CLI::IsMember({"train", "eval"}));
    train->add_option("--lr", ta.lr, "Peak learning rate (default: per stage)")->check(CLI::PositiveNumber)->default_str("");
    train->add_option("--warmup", ta.warmup, "Warmup ratio (default: per stage)")->check(CLI::Range(0.0, 1.0))->default_str("");
    train->add_option("--lambda", ta.lambda, "SILog lambda")->check(CLI::Range(0.0, 1.0))->default_str("");
    train->add_option("--alpha", ta.alpha, "Depth loss weight in stage 2")->check(CLI::NonNegativeNumber)->default_str("");
    train->add_option("--clip", ta.clip, "Global gradient norm clip")->check(CLI::PositiveNumber);
    train->add_flag("--stage2-only", ta.stage2_only, "Allow stage 2 without a stage-1 checkpoint");
    add_model_flags(train, ta.model);

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Score a trained model on sampled pixels");
    eval->add_option("--checkpoint", ea.checkpoint, "Trained checkpoint")->required();
    eval->add_option("--manifest", ea.manifest, "Manifest the queries refer to")->required();
    eval->add_option("--queries", ea.queries, "Query file")->required();
    eval->add_option("--out", ea.out, "Report file; stdout when omitted");
    eval->add_option("--records", ea.records, "Per-query records (JSON lines)");
    eval->add_option("--mode", ea.mode, "dense: one forward per image; point: one forward per query")
        ->check(CLI::IsMember({"dense", "point"}));
    add_metric_flags(eval, ea.delta, ea.literal, ea.format);

    BaselineArgs ba;
    auto* baseline = app.add_subcommand("baseline", "Score a constant-depth predictor");
    baseline->add_option("--value", ba.value, "Constant depth in meters")->check(CLI::PositiveNumber);
    baseline->add_option("--queries", ba.queries, "Query file")->required();
    baseline->add_option("--out", ba.out, "Report file; stdout when omitted");
    add_metric_flags(baseline, ba.delta, ba.literal, ba.format);

    MarkerArgs ma;
    auto* marker = app.add_subcommand("marker", "Render red-arrow probe images");
    marker->add_option("--image", ma.image, "Single PNG to annotate");
    marker->add_option("--u", ma.u, "Query column");
    marker->add_option("--v", ma.v, "Query row");
    marker->add_option("--out", ma.out, "Annotated PNG (single mode)");
    marker->add_option("--manifest", ma.manifest, "Manifest (batch mode)");
    marker->add_option("--queries", ma.queries, "Query file (batch mode)");
    marker->add_option("--out-dir", ma.out_dir, "Output directory (batch mode)");
    marker->add_option("--length", ma.length, "Arrow length in pixels")->check(CLI::PositiveNumber);
    marker->add_option("--stroke", ma.stroke, "Stroke width in pixels")->check(CLI::PositiveNumber);
    marker->add_option("--max-edge", ma.max_edge, "Longest edge before downscaling")->check(CLI::PositiveNumber);

    ReportArgs ra;
    auto* report = app.add_subcommand("report", "Validate a CSV report and re-emit it");
    report->add_option("--in", ra.in, "CSV report")->required();
    report->add_option("--out", ra.out, "Output file; stdout when omitted");
    report->add_option("--format", ra.format, "Output format")->check(CLI::IsMember({"text-table", "csv", "jsonl"}));

    DumpArgs da;
    auto* dump = app.add_subcommand("dump-roundtrip", "Parse, re-encode and optionally decode a DVLMFEAT file");
    dump->add_option("--in", da.in, "DVLMFEAT file");
    dump->add_option("--export-image", da.export_image, "Build the dump from this PNG with the stub encoder");
    dump->add_option("--image-id", da.image_id, "Image id stored by --export-image");
    dump->add_option("--out", da.out, "Write the re-encoded file here");
    dump->add_option("--checkpoint", da.checkpoint, "Decode the features through this model's head");
    dump->add_option("--depth-out", da.depth_out, "Decoded depth (GVKDEPTH)");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        const std::string ini = "INI was not able to parse ";
        if (msg.rfind(ini, 0) == 0) msg = "unknown config key '" + msg.substr(ini.size()) + "'";
        err << "gvk: " << msg << "\nRun with --help for usage.\n";
        return kExitUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    err << "config " << resolved_config_json(*sub) << "\n";
    try {
        if (sub == normalize) return run_normalize(na, out);
        if (sub == synth) return run_synth(sa, *synth, out);
        if (sub == sample) return run_sample(pa, out, err);
        if (sub == train) return run_train(ta, *train, out, err);
        if (sub == eval) return run_eval(ea, out, err);
        if (sub == baseline) return run_baseline(ba, out);
        if (sub == marker) return run_marker(ma, *marker, out);
        if (sub == report) return run_report(ra, out);
        if (sub == dump) return run_dump(da, out);
    } catch (const UsageError& e) {
        err << "gvk " << sub->get_name() << ": " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "gvk " << sub->get_name() << ": " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args, out, err);
}

}  // namespace gvk::cli
