#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gvk/tensor/tensor.hpp"

namespace gvk {

/// A named trainable tensor. `frozen` excludes it from optimizer updates.
struct Parameter {
    std::string name;
    Tensor tensor;
    bool frozen = false;
};

/// Ordered collection of parameters addressed by dotted path.
class ParameterStore {
public:
    /// Registers a new parameter; names must be unique.
    Tensor& add(const std::string& name, Tensor tensor);

    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }
    std::size_t size() const { return params_.size(); }
    std::size_t element_count() const;

    /// Freezes every parameter whose name starts with one of `prefixes`
    /// and unfreezes the rest. Frozen tensors stop requiring grad.
    void apply_freeze(const std::vector<std::string>& prefixes);
    void zero_grad();

private:
    std::vector<Parameter> params_;
    std::map<std::string, std::size_t> index_;
};

struct AdamWConfig {
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 0.01f;
};

/// Outcome of a single optimizer step.
struct StepReport {
    std::size_t updated = 0;
    std::vector<std::string> skipped_nonfinite;
};

/// Decoupled-weight-decay Adam with per-parameter bias-corrected moments.
class AdamW {
public:
    explicit AdamW(AdamWConfig config = {}) : config_(config) {}

    /// Updates every unfrozen parameter of `store` from its accumulated grad.
    /// A tensor whose gradient contains a non-finite value is left untouched
    /// and reported.
    StepReport step(ParameterStore& store, float lr);

    const AdamWConfig& config() const { return config_; }

    struct Moments {
        std::vector<float> m;
        std::vector<float> v;
        std::size_t steps = 0;
    };
    std::map<std::string, Moments>& state() { return state_; }
    const std::map<std::string, Moments>& state() const { return state_; }
    void reset() { state_.clear(); }

private:
    AdamWConfig config_;
    std::map<std::string, Moments> state_;
};

/// Scales gradients of unfrozen parameters so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
double clip_grad_norm(ParameterStore& store, double max_norm);

struct ScheduleConfig {
    double base_lr = 1e-3;
    double warmup_ratio = 0.0;
    std::size_t total_steps = 1;
    double min_lr = 0.0;

    void validate() const;
};

/// Linear warmup from 0 to base_lr over warmup_ratio * total_steps steps,
/// then cosine decay to min_lr at total_steps.
double lr_at(const ScheduleConfig& schedule, std::size_t step);

}  // namespace gvk
