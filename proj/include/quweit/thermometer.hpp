#pragma once

#include <cstdint>
#include <vector>

#include "quweit/tensor.hpp"

namespace quweit {

/// Unary (thermometer) encoder: each scalar feature is compared against T
/// increasing thresholds, producing T monotone bits. Thresholds are placed at
/// Gaussian quantiles of a calibration batch and frozen afterwards.
template <typename T>
struct ThermometerEncoderT {
    std::size_t num_features = 0;    // F
    std::size_t bits_per_feature = 0;  // T
    std::vector<T> thresholds;         // [F x T], strictly increasing along the bit axis
    T surrogate_width = T(1);          // w, support of the triangular backward kernel

    bool fitted() const { return !thresholds.empty(); }
    std::size_t output_width() const { return num_features * bits_per_feature; }

    T threshold(std::size_t f, std::size_t t) const { return thresholds[f * bits_per_feature + t]; }

    void validate() const;

    /// Hard comparison of one row of F features into F*T bits (0/1 bytes).
    void encode_row(const T* x, std::uint8_t* bits) const;

    /// Gaussian-quantile fit from a calibration batch [S x F]. Features with
    /// no spread fall back to uniform thresholds over [c-1, c+1]. The
    /// surrogate width defaults to the mean adjacent-threshold gap.
    static ThermometerEncoderT fit(const TensorT<T>& calibration, std::size_t bits_per_feature);

    /// Snap thresholds to the Q8.8 comparator grid (strict increase preserved).
    /// Required before netlist export so the comparator bank is exact.
    void snap_to_fixed_point();
};

/// Tape op: hard 0/1 bits with the triangular surrogate gradient
/// d bit / d x = max(0, 1 - |x - tau| / w) / w.
template <typename T>
TensorT<T> thermometer_encode_hard(TensorT<T> x, const ThermometerEncoderT<T>& enc);

/// Tape op: smooth relaxation sigmoid((x - tau) / (w/4)); its slope at the
/// threshold equals the hard surrogate peak 1/w, and thresholding at 0.5
/// recovers the hard bits.
template <typename T>
TensorT<T> thermometer_encode_soft(TensorT<T> x, const ThermometerEncoderT<T>& enc);

/// Standard normal quantile (inverse CDF).
double normal_quantile(double p);

using ThermometerEncoder = ThermometerEncoderT<float>;

}  // namespace quweit
