#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quweit/model.hpp"

namespace quweit {

/// Closed-form per-stage parameter and per-token MAC counts for an
/// encoder-only or decoder-only stack:
///   QKV projections   3 * n * D^2 params and MACs
///   Q.K^T             n * D * N MACs
///   softmax.V         n * N * D MACs
///   multi-head concat n * D^2 params and MACs
///   feed-forward 1/2  ratio * n * D^2 params and MACs each
struct StageCount {
    std::string name;
    std::uint64_t params = 0;          // 0 where the stage holds no weights
    std::uint64_t macs_per_token = 0;
};

struct WorkloadBreakdown {
    std::vector<StageCount> stages;
    std::uint64_t total_params = 0;
    std::uint64_t total_macs = 0;
    std::uint64_t mlp_params = 0;
    std::uint64_t mlp_macs = 0;
    double mlp_param_fraction = 0;
    double mlp_mac_fraction = 0;
};

WorkloadBreakdown count_workload(const ModelConfig& cfg);

std::string workload_text(const WorkloadBreakdown& wl);

}  // namespace quweit
