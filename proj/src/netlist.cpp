#include "quweit/netlist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "quweit/numeric.hpp"
#include "quweit/random.hpp"

namespace quweit {
namespace netlist {

namespace {

std::string fmt(const char* f, auto... args) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

int accumulator_width(const std::vector<std::int32_t>& constants) {
    std::int64_t lo = 0, hi = 0;
    for (auto c : constants) (c < 0 ? lo : hi) += c;
    int w = 2;
    while (!(lo >= -(std::int64_t{1} << (w - 1)) && hi <= (std::int64_t{1} << (w - 1)) - 1)) ++w;
    return w;
}

}  // namespace

Census Netlist::census() const {
    Census c;
    for (const auto& cell : cells) {
        if (std::holds_alternative<ComparatorCell>(cell)) ++c.comparators;
        else if (std::holds_alternative<LutCell>(cell)) ++c.luts;
        else ++c.sum_units;
    }
    return c;
}

void Netlist::validate() const {
    std::vector<int> drivers(nets.size(), -2);  // -2 unset, -1 primary input
    for (int in : input_nets) {
        if (in < 0 || std::size_t(in) >= nets.size()) throw std::runtime_error("netlist: bad input net id");
        drivers[in] = -1;
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const int out = std::visit([](const auto& cell) { return cell.out_net; }, cells[c]);
        if (out < 0 || std::size_t(out) >= nets.size()) throw std::runtime_error("netlist: bad output net id");
        if (drivers[out] != -2)
            throw std::runtime_error("netlist: net '" + nets[out].name + "' has multiple drivers");
        // inputs must be driven by strictly earlier cells: topological order, no cycles
        auto check_in = [&](int n) {
            if (n < 0 || std::size_t(n) >= nets.size()) throw std::runtime_error("netlist: bad input net id");
            if (drivers[n] == -2)
                throw std::runtime_error("netlist: net '" + nets[n].name +
                                         "' read before it is driven (unconnected or cyclic)");
        };
        std::visit(
            [&](const auto& cell) {
                using T = std::decay_t<decltype(cell)>;
                if constexpr (std::is_same_v<T, ComparatorCell>) check_in(cell.in_net);
                else if constexpr (std::is_same_v<T, LutCell>)
                    for (int n : cell.in_nets) check_in(n);
                else
                    for (int n : cell.in_bits) check_in(n);
            },
            cells[c]);
        drivers[out] = static_cast<int>(c);
    }
    for (int out : output_nets)
        if (out < 0 || std::size_t(out) >= nets.size() || drivers[out] < 0)
            throw std::runtime_error("netlist: output port not driven by a cell");
    for (std::size_t n = 0; n < nets.size(); ++n)
        if (drivers[n] == -2) throw std::runtime_error("netlist: net '" + nets[n].name + "' has no driver");
}

Netlist build_netlist(const Checkpoint& ckpt, std::size_t block_index) {
    const WeightlessFragment* frag = nullptr;
    for (const auto& f : ckpt.weightless)
        if (f.layer_index == block_index) frag = &f;
    if (!frag)
        throw std::runtime_error("checkpoint has no weightless block with index " +
                                 std::to_string(block_index));
    if (!frag->quantized())
        throw std::runtime_error(
            "block " + std::to_string(block_index) +
            " has unquantized encoded values; freeze the block (int8 quantization) before netlist export");
    for (float t : frag->thresholds)
        if (!fixed::representable(double(t)))
            throw std::runtime_error("block " + std::to_string(block_index) +
                                     " has thresholds off the Q8.8 grid; freeze the block before export");
    for (const auto& lf : frag->layers)
        if (lf.fan_in > 6)
            throw std::runtime_error("LUT fan-in " + std::to_string(lf.fan_in) +
                                     " unsupported by the 6-input fabric");

    Netlist nl;
    nl.source_digest = ckpt.digest.empty() ? "(unsaved checkpoint)" : ckpt.digest;
    nl.block_index = block_index;
    nl.output_scale = double(*frag->quant_scale);

    auto add_net = [&](std::string name, NetKind kind) {
        nl.nets.push_back({std::move(name), kind, -1});
        return static_cast<int>(nl.nets.size() - 1);
    };

    const std::size_t F = frag->features, T = frag->bits_per_feature;
    for (std::size_t f = 0; f < F; ++f) nl.input_nets.push_back(add_net(fmt("in_%zu", f), NetKind::Value));

    // comparator bank
    std::vector<int> bits;
    bits.reserve(F * T);
    for (std::size_t f = 0; f < F; ++f)
        for (std::size_t t = 0; t < T; ++t) {
            const int out = add_net(fmt("cmp_%zu_%zu", f, t), NetKind::Bit);
            const double thr = double(frag->thresholds[f * T + t]);
            nl.cells.push_back(ComparatorCell{nl.input_nets[f], fixed::from_real(thr), out});
            nl.nets[out].driver = static_cast<int>(nl.cells.size() - 1);
            bits.push_back(out);
        }

    // LUT layers
    for (std::size_t k = 0; k < frag->layers.size(); ++k) {
        const LutFragment& lf = frag->layers[k];
        std::vector<int> next;
        next.reserve(lf.num_luts);
        for (std::size_t l = 0; l < lf.num_luts; ++l) {
            const int out = add_net(fmt("l%zu_%zu", k, l), NetKind::Bit);
            LutCell cell;
            cell.fan_in = lf.fan_in;
            cell.init = parse_init_hex(lf.init_hex[l], std::size_t{1} << lf.fan_in);
            for (std::size_t j = 0; j < lf.fan_in; ++j) {
                const std::int32_t src = lf.mapping[l * lf.fan_in + j];
                if (src < 0 || std::size_t(src) >= bits.size())
                    throw std::runtime_error("fragment mapping index out of range");
                cell.in_nets.push_back(bits[std::size_t(src)]);
            }
            cell.out_net = out;
            nl.cells.push_back(std::move(cell));
            nl.nets[out].driver = static_cast<int>(nl.cells.size() - 1);
            next.push_back(out);
        }
        bits = std::move(next);
    }

    // conditional summation
    const std::size_t D = frag->output_dim, G = frag->group_size;
    if (bits.size() != D * G) throw std::runtime_error("fragment: final layer width does not equal D*G");
    for (std::size_t d = 0; d < D; ++d) {
        const int out = add_net(fmt("out_%zu", d), NetKind::Value);
        SumUnit unit;
        for (std::size_t g = 0; g < G; ++g) {
            unit.in_bits.push_back(bits[d * G + g]);
            unit.constants.push_back(frag->quant_levels[d * G + g]);
        }
        unit.acc_width = accumulator_width(unit.constants);
        unit.out_net = out;
        nl.cells.push_back(std::move(unit));
        nl.nets[out].driver = static_cast<int>(nl.cells.size() - 1);
        nl.output_nets.push_back(out);
    }

    nl.validate();
    return nl;
}

std::string emit_hdl(const Netlist& nl) {
    std::ostringstream os;
    const Census c = nl.census();
    os << "// structural netlist for a weightless feed-forward block\n";
    os << "// source checkpoint digest: " << nl.source_digest << "\n";
    os << "// block index: " << nl.block_index << "\n";
    os << "// inputs are signed Q8.8 fixed point (16 bits, 8 fraction bits)\n";
    os << "// LUT address bit order: input 0 of each LUT drives the MOST significant address bit;\n";
    os << "//   INIT bit 0 (LSB) is the output for address 0\n";
    os << fmt("// outputs are integer accumulations; multiply by %.9e downstream\n", nl.output_scale);
    os << fmt("// census: %zu comparators, %zu LUTs, %zu sum units\n", c.comparators, c.luts,
              c.sum_units);
    os << fmt("module weightless_block_%zu (\n", nl.block_index);
    os << "  input wire clk";
    for (int in : nl.input_nets) os << ",\n  input wire signed [15:0] " << nl.nets[in].name;
    for (int out : nl.output_nets) {
        const auto& unit = std::get<SumUnit>(nl.cells[nl.nets[out].driver]);
        os << fmt(",\n  output reg signed [%d:0] ", unit.acc_width - 1) << nl.nets[out].name;
    }
    os << "\n);\n\n";

    std::size_t lut_idx = 0;
    for (const auto& cell : nl.cells) {
        if (const auto* cmp = std::get_if<ComparatorCell>(&cell)) {
            const std::string& out = nl.nets[cmp->out_net].name;
            os << "  wire " << out << ";\n";
            if (cmp->threshold < 0)
                os << fmt("  assign %s = (%s >= -16'sd%d);\n", out.c_str(),
                          nl.nets[cmp->in_net].name.c_str(), -int(cmp->threshold));
            else
                os << fmt("  assign %s = (%s >= 16'sd%d);\n", out.c_str(),
                          nl.nets[cmp->in_net].name.c_str(), int(cmp->threshold));
        } else if (const auto* lut = std::get_if<LutCell>(&cell)) {
            const std::string& out = nl.nets[lut->out_net].name;
            const std::size_t table = std::size_t{1} << lut->fan_in;
            const int hex_chars = int((table + 3) / 4);
            os << fmt("  localparam [%zu:0] INIT_%zu = %zu'h%0*llx;\n", table - 1, lut_idx, table,
                      hex_chars, static_cast<unsigned long long>(lut->init));
            os << "  wire " << out << ";\n";
            os << "  assign " << out << " = INIT_" << lut_idx << "[{";
            for (std::size_t j = 0; j < lut->in_nets.size(); ++j)
                os << (j ? ", " : "") << nl.nets[lut->in_nets[j]].name;
            os << "}];\n";
            ++lut_idx;
        } else {
            const auto& unit = std::get<SumUnit>(cell);
            const std::string& out = nl.nets[unit.out_net].name;
            const int w = unit.acc_width;
            std::string prev;
            for (std::size_t g = 0; g < unit.in_bits.size(); ++g) {
                const std::string acc = fmt("%s_acc%zu", out.c_str(), g);
                const std::int32_t c = unit.constants[g];
                const std::string lit =
                    c < 0 ? fmt("-%d'sd%d", w, -c) : fmt("%d'sd%d", w, c);
                os << fmt("  wire signed [%d:0] %s;\n", w - 1, acc.c_str());
                os << fmt("  assign %s = %s%s(%s ? %s : %d'sd0);\n", acc.c_str(), prev.c_str(),
                          prev.empty() ? "" : " + ", nl.nets[unit.in_bits[g]].name.c_str(), lit.c_str(),
                          w);
                prev = acc;
            }
            os << fmt("  always @(posedge clk) %s <= %s;\n", out.c_str(), prev.c_str());
        }
    }
    os << "\nendmodule\n";
    return os.str();
}

std::vector<std::int32_t> interpret(const Netlist& nl, const std::vector<std::int16_t>& inputs) {
    if (inputs.size() != nl.input_nets.size())
        throw std::invalid_argument("interpret: expected " + std::to_string(nl.input_nets.size()) +
                                    " inputs, got " + std::to_string(inputs.size()));
    nl.validate();
    std::vector<std::int32_t> value(nl.nets.size(), 0);
    for (std::size_t f = 0; f < inputs.size(); ++f) value[nl.input_nets[f]] = inputs[f];
    for (const auto& cell : nl.cells) {
        if (const auto* cmp = std::get_if<ComparatorCell>(&cell)) {
            value[cmp->out_net] = value[cmp->in_net] >= cmp->threshold ? 1 : 0;
        } else if (const auto* lut = std::get_if<LutCell>(&cell)) {
            std::uint32_t addr = 0;
            for (int in : lut->in_nets) addr = (addr << 1) | std::uint32_t(value[in] & 1);
            value[lut->out_net] = std::int32_t((lut->init >> addr) & 1);
        } else {
            const auto& unit = std::get<SumUnit>(cell);
            std::int32_t acc = 0;
            for (std::size_t g = 0; g < unit.in_bits.size(); ++g)
                if (value[unit.in_bits[g]]) acc += unit.constants[g];
            value[unit.out_net] = acc;
        }
    }
    std::vector<std::int32_t> out;
    out.reserve(nl.output_nets.size());
    for (int n : nl.output_nets) out.push_back(value[n]);
    return out;
}

EquivalenceReport verify_equivalence(const Checkpoint& ckpt, std::size_t block_index,
                                     std::size_t num_vectors, std::uint64_t seed) {
    Model model = restore_model(ckpt);
    const WeightlessBlock& block = model.weightless_block(block_index);
    const Netlist nl = build_netlist(ckpt, block_index);

    const std::size_t F = block.config().num_features;
    EquivalenceReport report;
    report.census = nl.census();
    report.checkpoint_digest = nl.source_digest;
    report.block_index = block_index;

    Rng rng(seed);
    auto random_vector = [&]() {
        std::vector<std::int16_t> v(F);
        for (auto& x : v) x = std::int16_t(std::int32_t(rng.below(65536)) - 32768);
        return v;
    };

    std::vector<std::vector<std::int16_t>> vectors;
    vectors.push_back(std::vector<std::int16_t>(F, std::int16_t(-32768)));  // all-min
    vectors.push_back(std::vector<std::int16_t>(F, std::int16_t(32767)));   // all-max
    const auto& enc = block.encoder();
    for (std::size_t f = 0; f < F; ++f)
        for (std::size_t t = 0; t < enc.bits_per_feature; ++t) {
            const std::int32_t thr = std::int32_t(std::llround(double(enc.threshold(f, t)) * fixed::kScale));
            for (std::int32_t delta : {-1, 0, 1}) {
                auto v = random_vector();
                v[f] = std::int16_t(std::clamp(thr + delta, fixed::kMin, fixed::kMax));
                vectors.push_back(std::move(v));
            }
        }
    for (std::size_t i = 0; i < num_vectors; ++i) vectors.push_back(random_vector());

    std::vector<float> x(F);
    std::vector<std::int32_t> sw(block.config().output_dim);
    for (const auto& v : vectors) {
        for (std::size_t f = 0; f < F; ++f) x[f] = float(v[f]) / float(fixed::kScale);
        block.infer_row_ints(x.data(), sw.data());
        const auto hw = interpret(nl, v);
        ++report.vectors_tested;
        if (hw != sw) {
            if (report.mismatches == 0) report.first_failing = v;
            ++report.mismatches;
        }
    }
    return report;
}

json report_to_json(const EquivalenceReport& report) {
    json j;
    j["vectors_tested"] = report.vectors_tested;
    j["mismatches"] = report.mismatches;
    if (!report.first_failing.empty()) j["first_failing_vector"] = report.first_failing;
    j["census"] = {{"comparators", report.census.comparators},
                   {"luts", report.census.luts},
                   {"sum_units", report.census.sum_units}};
    j["checkpoint_digest"] = report.checkpoint_digest;
    j["block_index"] = report.block_index;
    return j;
}

}  // namespace netlist
}  // namespace quweit
