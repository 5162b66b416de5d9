#include "quweit/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace quweit {

void TrainConfig::validate() const {
    if (batch_size == 0 || context == 0 || steps == 0)
        throw std::invalid_argument("train config: batch, context, steps must be positive");
    if (!(lr > 0) || !(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1) || !(eps > 0))
        throw std::invalid_argument("train config: invalid optimizer settings");
    if (weight_decay < 0 || grad_clip <= 0) throw std::invalid_argument("train config: invalid decay/clip");
    if (warmup_steps > steps) throw std::invalid_argument("train config: warmup exceeds total steps");
    if (eval_interval == 0 || eval_batches == 0 || log_interval == 0)
        throw std::invalid_argument("train config: eval/log intervals must be positive");
}

double lr_at(std::size_t step, const TrainConfig& cfg) {
    if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
        return cfg.lr * double(step) / double(cfg.warmup_steps);
    if (step >= cfg.steps) return cfg.lr_floor;
    const double progress =
        double(step - cfg.warmup_steps) / double(cfg.steps - cfg.warmup_steps);
    const double cosine = 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
    return cfg.lr_floor + (cfg.lr - cfg.lr_floor) * cosine;
}

void AdamW::init(const ParameterStore& params) {
    slots_.clear();
    for (const auto& p : params.all()) {
        Slot s;
        s.m.assign(p.tensor.size(), 0.0f);
        s.v.assign(p.tensor.size(), 0.0f);
        slots_.emplace(p.name, std::move(s));
    }
    t_ = 0;
    rejected_ = 0;
}

bool AdamW::step(ParameterStore& params, const TrainConfig& cfg, double lr) {
    for (auto& p : params.all()) {
        if (!p.tensor.has_grad()) continue;
        for (float g : p.tensor.grad())
            if (!std::isfinite(g)) {
                ++rejected_;
                return false;
            }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(t_));
    for (auto& p : params.all()) {
        auto it = slots_.find(p.name);
        if (it == slots_.end()) throw std::runtime_error("optimizer has no state for '" + p.name + "'");
        Slot& s = it->second;
        auto w = p.tensor.data();
        auto g = p.tensor.grad();
        const double plr = lr * double(p.lr_mult);
        const double decay = p.decay ? cfg.weight_decay : 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            s.m[i] = float(cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * g[i]);
            s.v[i] = float(cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * double(g[i]) * double(g[i]));
            const double mhat = s.m[i] / bc1;
            const double vhat = s.v[i] / bc2;
            w[i] -= float(plr * (mhat / (std::sqrt(vhat) + cfg.eps) + decay * w[i]));
        }
    }
    return true;
}

double clip_gradients(ParameterStore& params, double max_norm) {
    double sq = 0;
    for (auto& p : params.all()) {
        if (!p.tensor.has_grad()) continue;
        for (float g : p.tensor.grad()) sq += double(g) * double(g);
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0) {
        const float scale = float(max_norm / norm);
        for (auto& p : params.all()) {
            if (!p.tensor.has_grad()) continue;
            for (auto& g : p.tensor.grad()) g *= scale;
        }
    }
    return norm;
}

}  // namespace quweit
