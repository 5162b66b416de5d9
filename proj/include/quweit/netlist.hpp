#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "quweit/checkpoint.hpp"

namespace quweit {

/// Structural netlist of a frozen weightless block: a comparator bank for the
/// thermometer thresholds, LUT primitives carrying INIT vectors, and one
/// mux-conditioned accumulator per output dimension. Nets are single-driver
/// wires; cells are stored in topological order.
namespace netlist {

enum class NetKind { Value, Bit };

struct Net {
    std::string name;
    NetKind kind;
    int driver = -1;  // cell index, -1 for primary inputs
};

/// Signed Q8.8 compare: out = (in >= threshold).
struct ComparatorCell {
    int in_net;
    std::int16_t threshold;  // fixed point, 8 fraction bits
    int out_net;
};

/// n-input LUT; init bit a (address 0 = LSB) is the output for address a.
/// Input net 0 is the most significant address bit.
struct LutCell {
    std::size_t fan_in;
    std::uint64_t init;
    std::vector<int> in_nets;
    int out_net;
};

/// G-way mux-add chain with a register stage; constants are the int8
/// encoded values, accumulated at full precision.
struct SumUnit {
    std::vector<int> in_bits;
    std::vector<std::int32_t> constants;
    int acc_width;
    int out_net;
};

using Cell = std::variant<ComparatorCell, LutCell, SumUnit>;

struct Census {
    std::size_t comparators = 0;
    std::size_t luts = 0;
    std::size_t sum_units = 0;
};

struct Netlist {
    std::vector<Net> nets;
    std::vector<Cell> cells;
    std::vector<int> input_nets;   // F value inputs
    std::vector<int> output_nets;  // D accumulator outputs
    std::string source_digest;
    std::size_t block_index = 0;
    double output_scale = 1.0;  // applied by the consumer

    Census census() const;
    /// Checks the single-driver property, topological cell order (hence
    /// acyclicity) and port connectivity.
    void validate() const;
};

/// Builds the netlist for one weightless block of a checkpoint. Requires the
/// block to be frozen: int8 encoded values and grid-representable
/// thresholds. Fan-in above 6 is rejected as an unsupported fabric.
Netlist build_netlist(const Checkpoint& ckpt, std::size_t block_index);

/// Deterministic structural Verilog; byte-stable for identical netlists.
std::string emit_hdl(const Netlist& nl);

/// Evaluates the netlist on one row of Q8.8 inputs; returns the D integer
/// accumulator values (caller applies output_scale).
std::vector<std::int32_t> interpret(const Netlist& nl, const std::vector<std::int16_t>& inputs);

struct EquivalenceReport {
    std::size_t vectors_tested = 0;
    std::size_t mismatches = 0;
    std::vector<std::int16_t> first_failing;  // empty when clean
    Census census;
    std::string checkpoint_digest;
    std::size_t block_index = 0;
};

/// Drives interpret() against the block's integer inference path on seeded
/// random vectors plus corner vectors (all-min, all-max, threshold-adjacent).
EquivalenceReport verify_equivalence(const Checkpoint& ckpt, std::size_t block_index,
                                     std::size_t num_vectors, std::uint64_t seed);

json report_to_json(const EquivalenceReport& report);

}  // namespace netlist
}  // namespace quweit
