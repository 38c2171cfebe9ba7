#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gvk/data/manifest.hpp"
#include "gvk/head/model.hpp"
#include "gvk/loss/losses.hpp"
#include "gvk/tensor/optim.hpp"

namespace gvk {

enum class Stage { one = 1, two = 2 };

struct StageSpec {
    Stage stage = Stage::one;
    std::vector<std::string> freeze;
    ScheduleConfig schedule;
    LossConfig loss;
    std::size_t steps = 0;
    std::size_t batch_size = 8;
    double clip_norm = 1.0;
    AdamWConfig adamw;

    void validate() const;
};

/// Stage one: head only, SILog, lr 3.5e-4, warmup 0.04. Stage two: ViT
/// frozen, text + 1.0 * depth, lr 2e-5, warmup 0.05. Cosine decay to 0.
StageSpec configure_default(Stage stage, std::size_t steps = 1000);

struct TrainExample {
    std::string id;
    Tensor image;  // [3, H, W]
    DepthMap depth;
};

std::vector<TrainExample> load_examples(const Manifest& manifest, std::optional<Split> split = Split::train);

struct TrainRecord {
    std::size_t step = 0;  // 1-based index of the completed step
    int stage = 1;
    double lr = 0.0;
    double depth_loss = 0.0;
    std::optional<double> text_loss;  // stage two only
    double joint = 0.0;
    double ema = 0.0;
};

/// One JSON object per line: step, stage, lr, depth_loss, text_loss, joint.
std::string to_jsonl(const TrainRecord& r);

struct TrainState {
    Stage stage = Stage::one;
    std::size_t step = 0;
    std::uint64_t seed = 0;
    bool stage1_done = false;
    double loss_ema = 0.0;
    bool ema_started = false;
    AdamW optimizer;
};

struct RunOptions {
    /// Stop early once state.step reaches this value (for resumption).
    std::size_t stop_at = std::numeric_limits<std::size_t>::max();
    /// Run stage two without a completed stage one.
    bool allow_stage2_only = false;
    std::function<void(const TrainRecord&)> on_record;
};

class TrainingAborted : public Error {
public:
    using Error::Error;
};

/// Runs (or resumes) a stage. Batches and per-example query pixels are
/// derived from (seed, step) only, so a restored state continues the exact
/// same trajectory. Entering stage two resets the optimizer moments.
std::vector<TrainRecord> run_stage(const StageSpec& spec, DepthVlm& model, const std::vector<TrainExample>& data,
                                   TrainState& state, const RunOptions& options = {});

/// Model parameters, optimizer moments and trainer counters in one GVKCKPT1
/// file.
std::vector<std::uint8_t> encode_train_state(const DepthVlm& model, const TrainState& state);
TrainState decode_train_state(const std::vector<std::uint8_t>& bytes, DepthVlm& model);
void save_train_state(const std::filesystem::path& path, const DepthVlm& model, const TrainState& state);
TrainState load_train_state(const std::filesystem::path& path, DepthVlm& model);

/// Example indices of batch `step` under one-epoch-at-a-time shuffling.
std::vector<std::size_t> batch_indices(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed,
                                       std::size_t step);

}  // namespace gvk
