#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "quweit/config.hpp"

namespace quweit {
namespace cost {

/// Accelerator profile: an a x a systolic array plus the weightless PE,
/// with unit power draws. The shipped profiles back-compute their powers
/// from reference energy measurements, so energy projections are a
/// consistency check of the linear model rather than predictions.
struct HardwareProfile {
    std::string label;
    std::size_t array_dim = 0;  // a
    double clock_hz = 0;
    std::map<std::string, double> power_w;  // unit -> watts

    void validate() const;
};

struct GemmShape {
    std::uint64_t m = 0, k = 0, n = 0;
};

/// Steady-state tiled GEMM latency: ceil(M/a) * ceil(K/a) * ceil(N/a) * a
/// cycles. Fill/drain is ignored.
std::uint64_t systolic_cycles(const GemmShape& g, std::size_t array_dim);

/// Weightless PE latency: one row per cycle times the accumulation factor.
std::uint64_t pe_cycles(std::uint64_t rows, std::uint64_t accumulation_factor);

/// energy = cycles / f * power(unit).
double energy_j(std::uint64_t cycles, const HardwareProfile& profile, const std::string& unit);

struct StageReport {
    std::string stage;
    std::uint64_t cycles = 0;
    double energy = 0;  // joules
    std::string unit;
};

/// Per-stage cycle/energy table for a single encoder/decoder layer:
/// Q, K, V projections, per-head QK^T and softmax.V, the concat projection,
/// then either the two MLP GEMMs on the systolic array or the weightless PE.
std::vector<StageReport> encoder_layer_report(const ModelConfig& cfg, const HardwareProfile& profile,
                                              bool use_weightless,
                                              std::uint64_t accumulation_factor = 1);

struct ComparisonReport {
    double baseline_j = 0;
    double quweit_j = 0;
    double ratio = 0;  // baseline / quweit
    std::vector<StageReport> baseline_stages;
    std::vector<StageReport> quweit_stages;
};

ComparisonReport compare(const std::vector<StageReport>& baseline,
                         const std::vector<StageReport>& quweit);

/// The MLP-pair-vs-PE table: both feed-forward GEMMs on each systolic
/// profile against the weightless PE row.
struct MlpVsPeRow {
    std::string method;
    std::uint64_t cycles = 0;
    double energy = 0;
};
std::vector<MlpVsPeRow> mlp_vs_pe_table(const ModelConfig& cfg,
                                        const std::vector<HardwareProfile>& systolic_profiles,
                                        const HardwareProfile& pe_profile);

/// Calibrated fixture profiles: fpga-8x8 .. fpga-64x64 at 200 MHz and
/// asic-8x8 .. asic-64x64 at 1 GHz (45nm reference).
std::vector<HardwareProfile> builtin_profiles();
HardwareProfile profile_by_label(const std::string& label);
HardwareProfile profile_from_json(const json& j);
json profile_to_json(const HardwareProfile& p);

json stage_reports_to_json(const std::vector<StageReport>& stages);
std::string stage_reports_text(const std::vector<StageReport>& stages);
std::string stage_reports_csv(const std::vector<StageReport>& stages);
json comparison_to_json(const ComparisonReport& report);
std::string comparison_text(const ComparisonReport& report);
std::string mlp_vs_pe_text(const std::vector<MlpVsPeRow>& rows);
json mlp_vs_pe_json(const std::vector<MlpVsPeRow>& rows);
std::string mlp_vs_pe_csv(const std::vector<MlpVsPeRow>& rows);

}  // namespace cost
}  // namespace quweit
