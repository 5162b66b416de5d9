#pragma once

#include <cstdint>
#include <vector>

#include "quweit/random.hpp"
#include "quweit/tensor.hpp"

namespace quweit {

/// One layer of n-input LUT neurons. Each LUT reads n bits of the previous
/// layer (through a fixed seeded mapping), forms an n-bit address with
/// mapping index 0 as the most significant bit, and outputs the sign bit of
/// the addressed entry.
template <typename T>
struct LutLayerT {
    std::size_t num_luts = 0;     // L
    std::size_t fan_in = 0;       // n, 1..6
    std::size_t input_width = 0;  // bit width of the previous layer
    std::vector<std::int32_t> mapping;  // [L x n] source-bit indices, distinct per LUT
    TensorT<T> theta;                   // [L x 2^n] trainable entries

    std::size_t table_size() const { return std::size_t{1} << fan_in; }

    void validate() const;

    /// Coverage-guaranteeing seeded mapping (round-robin over shuffled source
    /// indices) plus theta ~ uniform(-1, 1).
    static LutLayerT seeded(std::size_t num_luts, std::size_t fan_in, std::size_t input_width, Rng& rng);

    std::uint32_t address(const std::uint8_t* bits, std::size_t lut) const {
        const std::int32_t* map = mapping.data() + lut * fan_in;
        std::uint32_t addr = 0;
        for (std::size_t j = 0; j < fan_in; ++j) addr = (addr << 1) | bits[map[j]];
        return addr;
    }

    /// Bit-exact lookup of one input row (0/1 bytes in, 0/1 bytes out).
    void infer_row(const std::uint8_t* bits_in, std::uint8_t* bits_out) const;
};

/// Hard lookup with extended-finite-difference backward: the addressed entry
/// takes the straight-through gradient (clipped to |theta| <= 1) and each
/// mapped input bit receives upstream * (h(entry with bit=1) - h(entry with
/// bit=0)) where h is the hard 0/1 read at the observed address.
template <typename T>
TensorT<T> lut_forward_hard(TensorT<T> bits, LutLayerT<T>& layer);

/// Multilinear relaxation over input probabilities:
///   y_l = sum_a sigmoid(theta_l[a]/tau) * prod_j p_j^{a_j} (1-p_j)^{1-a_j}
/// Exact tape gradients; serves as the gradient oracle for the hard path.
template <typename T>
TensorT<T> lut_forward_soft(TensorT<T> probs, LutLayerT<T>& layer, T tau);

using LutLayer = LutLayerT<float>;

}  // namespace quweit
