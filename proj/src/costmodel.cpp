#include "quweit/costmodel.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace quweit {
namespace cost {

void HardwareProfile::validate() const {
    if (array_dim < 1) throw std::invalid_argument("profile: array dimension must be >= 1");
    if (!(clock_hz > 0)) throw std::invalid_argument("profile: clock must be positive");
    for (const auto& [unit, w] : power_w)
        if (!(w > 0)) throw std::invalid_argument("profile: power for unit '" + unit + "' must be positive");
}

std::uint64_t systolic_cycles(const GemmShape& g, std::size_t array_dim) {
    if (g.m == 0 || g.k == 0 || g.n == 0) throw std::invalid_argument("systolic_cycles: empty GEMM");
    if (array_dim == 0) throw std::invalid_argument("systolic_cycles: array dimension must be >= 1");
    const std::uint64_t a = array_dim;
    auto ceil_div = [](std::uint64_t x, std::uint64_t y) { return (x + y - 1) / y; };
    return ceil_div(g.m, a) * ceil_div(g.k, a) * ceil_div(g.n, a) * a;
}

std::uint64_t pe_cycles(std::uint64_t rows, std::uint64_t accumulation_factor) {
    if (rows < 1 || accumulation_factor < 1)
        throw std::invalid_argument("pe_cycles: rows and accumulation factor must be >= 1");
    return rows * accumulation_factor;
}

double energy_j(std::uint64_t cycles, const HardwareProfile& profile, const std::string& unit) {
    profile.validate();
    auto it = profile.power_w.find(unit);
    if (it == profile.power_w.end())
        throw std::invalid_argument("profile '" + profile.label + "' has no unit '" + unit + "'");
    return double(cycles) / profile.clock_hz * it->second;
}

std::vector<StageReport> encoder_layer_report(const ModelConfig& cfg, const HardwareProfile& profile,
                                              bool use_weightless, std::uint64_t accumulation_factor) {
    const std::uint64_t n = cfg.context;
    const std::uint64_t d = cfg.latent_dim;
    const std::uint64_t hd = cfg.head_dim();
    const std::uint64_t heads = cfg.n_heads;
    const std::uint64_t hidden = static_cast<std::uint64_t>(std::llround(cfg.mlp_ratio * double(d)));
    const std::size_t a = profile.array_dim;

    auto stage = [&](std::string name, std::uint64_t cycles, const std::string& unit) {
        return StageReport{std::move(name), cycles, energy_j(cycles, profile, unit), unit};
    };
    auto gemm = [&](std::string name, GemmShape g) {
        return stage(std::move(name), systolic_cycles(g, a), "systolic");
    };

    std::vector<StageReport> stages;
    stages.push_back(gemm("Q projection", {n, d, d}));
    stages.push_back(gemm("K projection", {n, d, d}));
    stages.push_back(gemm("V projection", {n, d, d}));
    stages.push_back(stage("Q.K^T", heads * systolic_cycles({n, hd, n}, a), "systolic"));
    stages.push_back(stage("softmax.V", heads * systolic_cycles({n, n, hd}, a), "systolic"));
    stages.push_back(gemm("multi-head concat", {n, d, d}));
    if (use_weightless) {
        stages.push_back(stage("weightless block", pe_cycles(n, accumulation_factor), "pe"));
    } else {
        stages.push_back(gemm("MLP dense 1", {n, d, hidden}));
        stages.push_back(gemm("MLP dense 2", {n, hidden, d}));
    }
    return stages;
}

ComparisonReport compare(const std::vector<StageReport>& baseline,
                         const std::vector<StageReport>& quweit) {
    if (baseline.empty() || quweit.empty()) throw std::invalid_argument("compare: empty stage list");
    // both reports must share the attention stages (same structure up front)
    const std::size_t shared = 6;
    if (baseline.size() < shared || quweit.size() < shared)
        throw std::invalid_argument("compare: reports missing attention stages");
    for (std::size_t i = 0; i < shared; ++i)
        if (baseline[i].stage != quweit[i].stage)
            throw std::invalid_argument("compare: stage structure mismatch at '" + baseline[i].stage + "'");
    ComparisonReport report;
    report.baseline_stages = baseline;
    report.quweit_stages = quweit;
    for (const auto& s : baseline) report.baseline_j += s.energy;
    for (const auto& s : quweit) report.quweit_j += s.energy;
    report.ratio = report.baseline_j / report.quweit_j;
    return report;
}

std::vector<MlpVsPeRow> mlp_vs_pe_table(const ModelConfig& cfg,
                                        const std::vector<HardwareProfile>& systolic_profiles,
                                        const HardwareProfile& pe_profile) {
    const std::uint64_t n = cfg.context;
    const std::uint64_t d = cfg.latent_dim;
    const std::uint64_t hidden = static_cast<std::uint64_t>(std::llround(cfg.mlp_ratio * double(d)));
    std::vector<MlpVsPeRow> rows;
    for (const auto& p : systolic_profiles) {
        const std::uint64_t cycles =
            systolic_cycles({n, d, hidden}, p.array_dim) + systolic_cycles({n, hidden, d}, p.array_dim);
        rows.push_back({std::to_string(p.array_dim) + "x" + std::to_string(p.array_dim) + " systolic",
                        cycles, energy_j(cycles, p, "systolic")});
    }
    const std::uint64_t cycles = pe_cycles(n, 1);
    rows.push_back({"weightless PE", cycles, energy_j(cycles, pe_profile, "pe")});
    return rows;
}

std::vector<HardwareProfile> builtin_profiles() {
    // Powers are back-computed from reference cycle/energy measurements of
    // the same systolic and PE designs (calibration inputs, not predictions).
    std::vector<HardwareProfile> profiles;
    const double fpga_clk = 200e6, asic_clk = 1e9;
    auto add = [&](std::string label, std::size_t a, double clk, double systolic_w, double pe_w) {
        profiles.push_back(
            {std::move(label), a, clk, {{"systolic", systolic_w}, {"pe", pe_w}}});
    };
    add("fpga-8x8", 8, fpga_clk, 0.127, 0.153);
    add("fpga-16x16", 16, fpga_clk, 0.273, 0.153);
    add("fpga-32x32", 32, fpga_clk, 0.585, 0.153);
    add("fpga-64x64", 64, fpga_clk, 1.469, 0.153);
    add("asic-8x8", 8, asic_clk, 0.05697, 0.0051);
    add("asic-16x16", 16, asic_clk, 0.1176, 0.0051);
    add("asic-32x32", 32, asic_clk, 0.250, 0.0051);
    add("asic-64x64", 64, asic_clk, 0.561, 0.0051);
    return profiles;
}

HardwareProfile profile_by_label(const std::string& label) {
    for (auto& p : builtin_profiles())
        if (p.label == label) return p;
    throw std::invalid_argument("unknown profile '" + label +
                                "' (built-ins: fpga-{8x8,16x16,32x32,64x64}, asic-{8x8,16x16,32x32,64x64})");
}

HardwareProfile profile_from_json(const json& j) {
    HardwareProfile p;
    p.label = j.at("label").get<std::string>();
    p.array_dim = j.at("array_dim").get<std::size_t>();
    p.clock_hz = j.at("clock_hz").get<double>();
    for (auto it = j.at("power_w").begin(); it != j.at("power_w").end(); ++it)
        p.power_w[it.key()] = it.value().get<double>();
    p.validate();
    return p;
}

json profile_to_json(const HardwareProfile& p) {
    json j;
    j["label"] = p.label;
    j["array_dim"] = p.array_dim;
    j["clock_hz"] = p.clock_hz;
    j["power_w"] = p.power_w;
    j["provenance"] = "power back-computed from reference measurements";
    return j;
}

namespace {
std::string uj(double joules) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", joules * 1e6);
    return buf;
}
}  // namespace

json stage_reports_to_json(const std::vector<StageReport>& stages) {
    json arr = json::array();
    for (const auto& s : stages)
        arr.push_back({{"stage", s.stage}, {"cycles", s.cycles}, {"energy_j", s.energy}, {"unit", s.unit}});
    return arr;
}

std::string stage_reports_text(const std::vector<StageReport>& stages) {
    std::ostringstream os;
    char line[128];
    std::snprintf(line, sizeof(line), "%-20s %12s %14s %10s\n", "stage", "cycles", "energy (uJ)", "unit");
    os << line;
    std::uint64_t cycles = 0;
    double total = 0;
    for (const auto& s : stages) {
        std::snprintf(line, sizeof(line), "%-20s %12llu %14s %10s\n", s.stage.c_str(),
                      static_cast<unsigned long long>(s.cycles), uj(s.energy).c_str(), s.unit.c_str());
        os << line;
        cycles += s.cycles;
        total += s.energy;
    }
    std::snprintf(line, sizeof(line), "%-20s %12llu %14s\n", "total",
                  static_cast<unsigned long long>(cycles), uj(total).c_str());
    os << line;
    return os.str();
}

std::string stage_reports_csv(const std::vector<StageReport>& stages) {
    std::ostringstream os;
    os << "stage,cycles,energy_j,unit\n";
    char line[128];
    for (const auto& s : stages) {
        std::snprintf(line, sizeof(line), "%s,%llu,%.9e,%s\n", s.stage.c_str(),
                      static_cast<unsigned long long>(s.cycles), s.energy, s.unit.c_str());
        os << line;
    }
    return os.str();
}

std::string mlp_vs_pe_csv(const std::vector<MlpVsPeRow>& rows) {
    std::ostringstream os;
    os << "method,cycles,energy_j\n";
    char line[128];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%s,%llu,%.9e\n", r.method.c_str(),
                      static_cast<unsigned long long>(r.cycles), r.energy);
        os << line;
    }
    return os.str();
}

json comparison_to_json(const ComparisonReport& report) {
    json j;
    j["baseline_energy_j"] = report.baseline_j;
    j["quweit_energy_j"] = report.quweit_j;
    j["ratio"] = report.ratio;
    j["baseline_stages"] = stage_reports_to_json(report.baseline_stages);
    j["quweit_stages"] = stage_reports_to_json(report.quweit_stages);
    return j;
}

std::string comparison_text(const ComparisonReport& report) {
    std::ostringstream os;
    os << "baseline (MLP on systolic array):\n" << stage_reports_text(report.baseline_stages);
    os << "\nquweit (weightless PE for the feed-forward):\n" << stage_reports_text(report.quweit_stages);
    char line[128];
    std::snprintf(line, sizeof(line), "\ntotals: baseline %s uJ, quweit %s uJ, ratio %.2fx\n",
                  uj(report.baseline_j).c_str(), uj(report.quweit_j).c_str(), report.ratio);
    os << line;
    return os.str();
}

std::string mlp_vs_pe_text(const std::vector<MlpVsPeRow>& rows) {
    std::ostringstream os;
    char line[128];
    std::snprintf(line, sizeof(line), "%-18s %12s %14s\n", "method", "cycles", "energy (uJ)");
    os << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%-18s %12llu %14s\n", r.method.c_str(),
                      static_cast<unsigned long long>(r.cycles), uj(r.energy).c_str());
        os << line;
    }
    return os.str();
}

json mlp_vs_pe_json(const std::vector<MlpVsPeRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"method", r.method}, {"cycles", r.cycles}, {"energy_j", r.energy}});
    return arr;
}

}  // namespace cost
}  // namespace quweit
