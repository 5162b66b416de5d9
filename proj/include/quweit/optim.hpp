#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "quweit/parameter.hpp"

namespace quweit {

struct TrainConfig {
    std::size_t batch_size = 16;
    std::size_t context = 128;
    std::size_t steps = 2000;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
    double weight_decay = 0.1;
    std::size_t warmup_steps = 100;
    double lr_floor = 1e-4;  // cosine decay floor
    double grad_clip = 1.0;
    std::uint64_t seed = 1337;
    std::size_t eval_interval = 250;
    std::size_t eval_batches = 8;
    std::size_t log_interval = 10;
    std::size_t calibration_sequences = 8;

    void validate() const;
};

/// Linear warmup to lr, then cosine decay to the floor.
double lr_at(std::size_t step, const TrainConfig& cfg);

/// AdamW with decoupled weight decay. Decay applies only to parameters in
/// the decay group (LUT entries, norm gains/biases and thermometer data are
/// exempt). A step with any non-finite gradient is rejected and counted.
class AdamW {
public:
    struct Slot {
        std::vector<float> m, v;
    };

    void init(const ParameterStore& params);

    /// Returns false when the step was rejected (non-finite gradients).
    bool step(ParameterStore& params, const TrainConfig& cfg, double lr);

    std::uint64_t steps_taken() const { return t_; }
    std::uint64_t rejected_steps() const { return rejected_; }

    std::map<std::string, Slot>& slots() { return slots_; }
    const std::map<std::string, Slot>& slots() const { return slots_; }
    void set_counters(std::uint64_t t, std::uint64_t rejected) {
        t_ = t;
        rejected_ = rejected;
    }

private:
    std::map<std::string, Slot> slots_;
    std::uint64_t t_ = 0;
    std::uint64_t rejected_ = 0;
};

/// Global-norm gradient clipping; returns the pre-clip norm.
double clip_gradients(ParameterStore& params, double max_norm);

}  // namespace quweit
