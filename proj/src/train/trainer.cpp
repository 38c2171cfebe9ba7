#include "gvk/train/trainer.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "gvk/data/image.hpp"
#include "gvk/data/sampling.hpp"
#include "gvk/tensor/checkpoint.hpp"
#include "gvk/tensor/ops.hpp"
#include "gvk/train/text_task.hpp"

namespace gvk {

void StageSpec::validate() const {
    schedule.validate();
    loss.validate();
    if (batch_size == 0) throw Error("stage: batch_size must be > 0");
    if (!(clip_norm > 0.0)) throw Error("stage: clip_norm must be > 0");
}

StageSpec configure_default(Stage stage, std::size_t steps) {
    StageSpec s;
    s.stage = stage;
    s.steps = steps;
    s.batch_size = 8;
    s.schedule.total_steps = std::max<std::size_t>(steps, 1);
    if (stage == Stage::one) {
        s.freeze = {"vit.", "proj.", "llm."};
        s.schedule.base_lr = 3.5e-4;
        s.schedule.warmup_ratio = 0.04;
    } else {
        s.freeze = {"vit."};
        s.schedule.base_lr = 2e-5;
        s.schedule.warmup_ratio = 0.05;
    }
    s.loss.lambda = 0.5;
    s.loss.alpha = 1.0;
    return s;
}

std::vector<TrainExample> load_examples(const Manifest& manifest, std::optional<Split> split) {
    std::vector<TrainExample> out;
    for (const auto& s : manifest.entries) {
        if (split && s.split != *split) continue;
        auto image = read_png(manifest.resolve(s.image));
        auto depth = load_depth_file(manifest.resolve(s.depth));
        if (image.width != depth.width() || image.height != depth.height()) {
            throw DataError("sample '" + s.id + "': image and depth sizes differ");
        }
        out.push_back({s.id, to_tensor(image), std::move(depth)});
    }
    return out;
}

std::string to_jsonl(const TrainRecord& r) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["stage"] = r.stage;
    j["lr"] = r.lr;
    j["depth_loss"] = r.depth_loss;
    j["text_loss"] = r.text_loss ? nlohmann::ordered_json(*r.text_loss) : nlohmann::ordered_json(nullptr);
    j["joint"] = r.joint;
    return j.dump() + "\n";
}

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b * 0x9e3779b97f4a7c15ULL);
    return splitmix64(s);
}

// Uniformly chosen usable pixel, as (u, v).
std::pair<std::size_t, std::size_t> pick_pixel(const DepthMap& depth, std::uint64_t rng) {
    const auto count = depth.valid_count();
    if (count == 0) throw DataError("training example without valid depth");
    auto k = draw_below(rng, count);
    for (std::size_t y = 0; y < depth.height(); ++y) {
        for (std::size_t x = 0; x < depth.width(); ++x) {
            if (!depth.is_valid(y, x)) continue;
            if (k-- == 0) return {x, y};
        }
    }
    throw Error("pick_pixel: unreachable");
}

bool all_finite(const Tensor& t) {
    for (float v : t.data())
        if (!std::isfinite(v)) return false;
    return true;
}

// Exact u64/f64 storage in f32 entries, 16 bits per element.
std::vector<float> pack_u64(std::uint64_t v) {
    std::vector<float> out(4);
    for (int i = 0; i < 4; ++i) out[i] = static_cast<float>((v >> (16 * i)) & 0xFFFF);
    return out;
}

std::uint64_t unpack_u64(const std::vector<float>& d) {
    if (d.size() != 4) throw Error("train state: malformed packed integer");
    std::uint64_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint64_t>(d[i]) << (16 * i);
    return v;
}

constexpr float kTrainStateVersion = 1.0f;

}  // namespace

std::vector<std::size_t> batch_indices(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed,
                                       std::size_t step) {
    if (dataset_size == 0) throw DataError("training set is empty");
    std::vector<std::size_t> out;
    std::size_t cached_epoch = SIZE_MAX;
    std::vector<std::size_t> perm(dataset_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const auto pos = step * batch_size + i;
        const auto epoch = pos / dataset_size;
        if (epoch != cached_epoch) {
            std::iota(perm.begin(), perm.end(), 0);
            std::uint64_t rng = mix(seed, epoch + 1);
            for (std::size_t j = dataset_size; j > 1; --j) std::swap(perm[j - 1], perm[draw_below(rng, j)]);
            cached_epoch = epoch;
        }
        out.push_back(perm[pos % dataset_size]);
    }
    return out;
}

std::vector<TrainRecord> run_stage(const StageSpec& spec, DepthVlm& model, const std::vector<TrainExample>& data,
                                   TrainState& state, const RunOptions& options) {
    spec.validate();
    if (data.empty()) throw DataError("training set is empty");
    if (state.stage != spec.stage || (spec.stage == Stage::two && state.step == 0)) {
        if (spec.stage == Stage::two && !state.stage1_done && !options.allow_stage2_only) {
            throw Error("stage two needs a completed stage-one checkpoint (or the stage-two-only override)");
        }
        if (state.stage != spec.stage) {
            state.stage = spec.stage;
            state.step = 0;
            state.ema_started = false;
            state.loss_ema = 0.0;
            state.optimizer = AdamW(spec.adamw);
        }
    }
    auto& store = model.parameters();
    store.apply_freeze(spec.freeze);
    auto schedule = spec.schedule;
    schedule.total_steps = std::max<std::size_t>(spec.steps, 1);

    const double inv_batch = 1.0 / static_cast<double>(spec.batch_size);
    const bool two = spec.stage == Stage::two;
    const auto prompt = text_task::dense_prompt();
    std::vector<TrainRecord> records;
    int consecutive_bad = 0;

    while (state.step < spec.steps && state.step < options.stop_at) {
        const double lr = lr_at(schedule, state.step);
        store.zero_grad();
        const auto idx = batch_indices(data.size(), spec.batch_size, state.seed, state.step);
        double depth_sum = 0.0, text_sum = 0.0;
        std::string bad;
        for (std::size_t i = 0; i < idx.size() && bad.empty(); ++i) {
            const auto& ex = data[idx[i]];
            TextSequence text = prompt;
            if (two) {
                const auto [u, v] = pick_pixel(ex.depth, mix(mix(state.seed, state.step + 1), i));
                text = text_task::point_pair(u, v, ex.depth.width(), ex.depth.height(), ex.depth.at(v, u));
            }
            auto out = model.forward(ex.image, text);
            if (!all_finite(out.depth)) {
                bad = "non-finite depth prediction for '" + ex.id + "'";
                break;
            }
            auto depth = silog_loss(out.depth, ex.depth, spec.loss.lambda, spec.loss.log_floor);
            Tensor loss = depth;
            if (two) {
                auto text_term = text_task::answer_loss(out.text_logits, text);
                if (!std::isfinite(text_term.item())) {
                    bad = "non-finite text loss for '" + ex.id + "'";
                    break;
                }
                text_sum += text_term.item();
                loss = joint_loss(text_term, depth, spec.loss.alpha);
            }
            if (!std::isfinite(depth.item())) {
                bad = "non-finite depth loss for '" + ex.id + "'";
                break;
            }
            depth_sum += depth.item();
            ops::scale(loss, static_cast<float>(inv_batch)).backward();
        }
        ++state.step;
        if (!bad.empty()) {
            store.zero_grad();
            if (++consecutive_bad >= 2) {
                throw TrainingAborted("training aborted at stage " + std::to_string(static_cast<int>(spec.stage)) +
                                      " step " + std::to_string(state.step) +
                                      ": non-finite loss on two consecutive steps; last: " + bad);
            }
            continue;
        }
        consecutive_bad = 0;
        clip_grad_norm(store, spec.clip_norm);
        state.optimizer.step(store, static_cast<float>(lr));

        TrainRecord r;
        r.step = state.step;
        r.stage = static_cast<int>(spec.stage);
        r.lr = lr;
        r.depth_loss = depth_sum * inv_batch;
        if (two) r.text_loss = text_sum * inv_batch;
        r.joint = two ? *r.text_loss + spec.loss.alpha * r.depth_loss : r.depth_loss;
        state.loss_ema = state.ema_started ? 0.9 * state.loss_ema + 0.1 * r.joint : r.joint;
        state.ema_started = true;
        r.ema = state.loss_ema;
        if (options.on_record) options.on_record(r);
        records.push_back(r);
    }
    if (spec.stage == Stage::one && state.step >= spec.steps) state.stage1_done = true;
    return records;
}

std::vector<std::uint8_t> encode_train_state(const DepthVlm& model, const TrainState& state) {
    auto entries = snapshot(model.parameters(), &state.optimizer);
    entries.push_back({"trainer/version", {1}, {kTrainStateVersion}});
    entries.push_back({"trainer/stage", {1}, {static_cast<float>(state.stage)}});
    entries.push_back({"trainer/step", {4}, pack_u64(state.step)});
    entries.push_back({"trainer/seed", {4}, pack_u64(state.seed)});
    entries.push_back({"trainer/stage1_done", {1}, {state.stage1_done ? 1.0f : 0.0f}});
    entries.push_back({"trainer/ema", {4}, pack_u64(std::bit_cast<std::uint64_t>(state.loss_ema))});
    entries.push_back({"trainer/ema_started", {1}, {state.ema_started ? 1.0f : 0.0f}});
    return encode_checkpoint(entries);
}

TrainState decode_train_state(const std::vector<std::uint8_t>& bytes, DepthVlm& model) {
    const auto entries = decode_checkpoint(bytes);
    std::map<std::string, const CheckpointEntry*> trainer;
    for (const auto& e : entries)
        if (e.name.rfind("trainer/", 0) == 0) trainer[e.name] = &e;
    auto get = [&](const std::string& name) -> const std::vector<float>& {
        auto it = trainer.find("trainer/" + name);
        if (it == trainer.end()) throw Error("train state: missing trainer/" + name);
        return it->second->data;
    };
    if (get("version").at(0) != kTrainStateVersion) {
        throw Error("train state: unsupported version " + std::to_string(get("version").at(0)));
    }
    TrainState state;
    restore(entries, model.parameters(), &state.optimizer);
    const auto stage = get("stage").at(0);
    if (stage != 1.0f && stage != 2.0f) throw Error("train state: bad stage");
    state.stage = stage == 1.0f ? Stage::one : Stage::two;
    state.step = static_cast<std::size_t>(unpack_u64(get("step")));
    state.seed = unpack_u64(get("seed"));
    state.stage1_done = get("stage1_done").at(0) != 0.0f;
    state.loss_ema = std::bit_cast<double>(unpack_u64(get("ema")));
    state.ema_started = get("ema_started").at(0) != 0.0f;
    return state;
}

void save_train_state(const std::filesystem::path& path, const DepthVlm& model, const TrainState& state) {
    io::write_file(path, encode_train_state(model, state));
}

TrainState load_train_state(const std::filesystem::path& path, DepthVlm& model) {
    return decode_train_state(io::read_file(path), model);
}

}  // namespace gvk
