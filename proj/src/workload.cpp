#include "quweit/workload.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace quweit {

WorkloadBreakdown count_workload(const ModelConfig& cfg) {
    const std::uint64_t n = cfg.n_layers;
    const std::uint64_t d = cfg.latent_dim;
    const std::uint64_t ctx = cfg.context;
    const std::uint64_t hidden = static_cast<std::uint64_t>(std::llround(cfg.mlp_ratio * double(d)));

    WorkloadBreakdown wl;
    wl.stages = {
        {"Q, K, V projection", 3 * n * d * d, 3 * n * d * d},
        {"Q.K^T", 0, n * d * ctx},
        {"softmax.V", 0, n * ctx * d},
        {"multi-head concat", n * d * d, n * d * d},
        {"feed-forward 1", n * d * hidden, n * d * hidden},
        {"feed-forward 2", n * hidden * d, n * hidden * d},
    };
    for (const auto& s : wl.stages) {
        wl.total_params += s.params;
        wl.total_macs += s.macs_per_token;
    }
    wl.mlp_params = wl.stages[4].params + wl.stages[5].params;
    wl.mlp_macs = wl.stages[4].macs_per_token + wl.stages[5].macs_per_token;
    wl.mlp_param_fraction = double(wl.mlp_params) / double(wl.total_params);
    wl.mlp_mac_fraction = double(wl.mlp_macs) / double(wl.total_macs);
    return wl;
}

namespace {
std::string with_commas(std::uint64_t v) {
    std::string s = std::to_string(v);
    for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(i, ",");
    return s;
}
}  // namespace

std::string workload_text(const WorkloadBreakdown& wl) {
    std::ostringstream os;
    os << std::left << std::setw(22) << "stage" << std::right << std::setw(22) << "params"
       << std::setw(22) << "MACs/token" << "\n";
    for (const auto& s : wl.stages) {
        os << std::left << std::setw(22) << s.name << std::right << std::setw(22)
           << (s.params ? with_commas(s.params) : std::string("-")) << std::setw(22)
           << with_commas(s.macs_per_token) << "\n";
    }
    os << std::left << std::setw(22) << "total" << std::right << std::setw(22)
       << with_commas(wl.total_params) << std::setw(22) << with_commas(wl.total_macs) << "\n";
    os << std::fixed << std::setprecision(1);
    os << "MLP share: " << 100.0 * wl.mlp_param_fraction << "% of params, "
       << 100.0 * wl.mlp_mac_fraction << "% of MACs\n";
    return os.str();
}

}  // namespace quweit
