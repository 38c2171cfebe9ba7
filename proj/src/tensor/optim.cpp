#include "gvk/tensor/optim.hpp"

#include <cmath>
#include <numbers>

namespace gvk {

Tensor& ParameterStore::add(const std::string& name, Tensor tensor) {
    if (index_.count(name)) throw Error("duplicate parameter name: " + name);
    tensor.set_requires_grad(true);
    index_[name] = params_.size();
    params_.push_back({name, std::move(tensor), false});
    return params_.back().tensor;
}

Parameter& ParameterStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter: " + name);
    return params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter: " + name);
    return params_[it->second];
}

std::size_t ParameterStore::element_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
}

void ParameterStore::apply_freeze(const std::vector<std::string>& prefixes) {
    for (auto& p : params_) {
        bool frozen = false;
        for (const auto& prefix : prefixes) frozen = frozen || p.name.rfind(prefix, 0) == 0;
        p.frozen = frozen;
        p.tensor.set_requires_grad(!frozen);
    }
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

StepReport AdamW::step(ParameterStore& store, float lr) {
    StepReport report;
    for (auto& p : store.all()) {
        if (p.frozen || !p.tensor.has_grad()) continue;
        auto grad = p.tensor.grad();
        bool finite = true;
        for (float g : grad) finite = finite && std::isfinite(g);
        if (!finite) {
            report.skipped_nonfinite.push_back(p.name);
            continue;
        }
        auto& st = state_[p.name];
        if (st.m.size() != grad.size()) {
            st.m.assign(grad.size(), 0.0f);
            st.v.assign(grad.size(), 0.0f);
            st.steps = 0;
        }
        ++st.steps;
        const double bc1 = 1.0 - std::pow(static_cast<double>(config_.beta1), static_cast<double>(st.steps));
        const double bc2 = 1.0 - std::pow(static_cast<double>(config_.beta2), static_cast<double>(st.steps));
        const float step_size = static_cast<float>(lr / bc1);
        const float sqrt_bc2 = static_cast<float>(std::sqrt(bc2));
        const float decay = 1.0f - lr * config_.weight_decay;
        auto data = p.tensor.mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            st.m[i] = config_.beta1 * st.m[i] + (1.0f - config_.beta1) * grad[i];
            st.v[i] = config_.beta2 * st.v[i] + (1.0f - config_.beta2) * grad[i] * grad[i];
            data[i] *= decay;
            data[i] -= step_size * st.m[i] / (std::sqrt(st.v[i]) / sqrt_bc2 + config_.eps);
        }
        ++report.updated;
    }
    return report;
}

double clip_grad_norm(ParameterStore& store, double max_norm) {
    double sq = 0.0;
    for (auto& p : store.all()) {
        if (p.frozen || !p.tensor.has_grad()) continue;
        for (float g : p.tensor.grad()) sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(sq);
    if (std::isfinite(norm) && norm > max_norm && norm > 0.0) {
        const auto factor = static_cast<float>(max_norm / norm);
        for (auto& p : store.all()) {
            if (p.frozen || !p.tensor.has_grad()) continue;
            for (auto& g : p.tensor.mutable_grad()) g *= factor;
        }
    }
    return norm;
}

void ScheduleConfig::validate() const {
    if (!(base_lr > 0.0)) throw Error("schedule: base_lr must be > 0");
    if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) throw Error("schedule: warmup_ratio must be in [0,1)");
    if (total_steps == 0) throw Error("schedule: total_steps must be > 0");
}

double lr_at(const ScheduleConfig& schedule, std::size_t step) {
    schedule.validate();
    if (step > schedule.total_steps) {
        throw Error("lr_at: step " + std::to_string(step) + " beyond total_steps " +
                    std::to_string(schedule.total_steps));
    }
    const double total = static_cast<double>(schedule.total_steps);
    const double warmup = schedule.warmup_ratio * total;
    const double s = static_cast<double>(step);
    if (s < warmup) return schedule.base_lr * s / warmup;
    if (total <= warmup) return schedule.base_lr;
    const double progress = (s - warmup) / (total - warmup);
    return schedule.min_lr +
           0.5 * (schedule.base_lr - schedule.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace gvk
