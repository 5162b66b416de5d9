#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "quweit/lut.hpp"
#include "quweit/random.hpp"
#include "quweit/tensor.hpp"
#include "quweit/thermometer.hpp"

namespace quweit {

enum class TrainingMode { HardEfd, Soft };

TrainingMode training_mode_from_string(const std::string& s);
std::string to_string(TrainingMode m);

/// Output layer of the weightless block: final-layer LUT bit (d*G + g) gates
/// the addition of encoded value e[d][g] into summation unit d. Inference is
/// conditional adds only; no multiplications.
template <typename T>
struct ConditionalSummationT {
    std::size_t output_dim = 0;  // D
    std::size_t group_size = 0;  // G
    TensorT<T> encoded;          // [D x G] trainable, fp32 during training

    struct Quantization {
        T scale = T(1);                    // symmetric per-block scale
        std::vector<std::int8_t> levels;   // [D x G], range [-127, 127]
        std::vector<T> dequant;            // scale * levels, cached
    };
    std::optional<Quantization> quant;

    std::size_t input_width() const { return output_dim * group_size; }
    void validate() const;

    static ConditionalSummationT init(std::size_t output_dim, std::size_t group_size, Rng& rng);

    /// Bit-exact conditional adds for one row. With quantization present the
    /// accumulation is integer and scaled once at the end.
    void infer_row(const std::uint8_t* bits, T* out) const;
    /// Integer accumulation (quantized blocks only); matches the netlist.
    void infer_row_ints(const std::uint8_t* bits, std::int32_t* out) const;
};

/// Int8 symmetric quantization of the encoded values: scale = max|e|/127,
/// round half to even. All-zero e degrades to scale 1.
template <typename T>
ConditionalSummationT<T> quantize_encodings(const ConditionalSummationT<T>& cs);

/// Tape op. Hard mode feeds 0/1 bits, soft mode feeds probabilities; both use
/// d out[d] / d e[d][g] = bit and d out[d] / d bit = e[d][g].
template <typename T>
TensorT<T> cond_sum_forward(TensorT<T> bits, ConditionalSummationT<T>& cs);

struct WeightlessBlockConfig {
    std::size_t num_features = 0;            // F
    std::size_t bits_per_feature = 8;        // T
    std::vector<std::size_t> layer_widths;   // L1..Lk, Lk = D*G
    std::size_t fan_in = 6;                  // n
    std::size_t output_dim = 0;              // D
    std::size_t group_size = 1;              // G
    TrainingMode mode = TrainingMode::HardEfd;
    double temperature = 1.0 / 3.0;          // soft-mode tau
    std::uint64_t seed = 0;

    void validate() const;
};

/// The differentiable weightless block: thermometer encoder -> LUT layers ->
/// conditional summation, with a dual forward (training tape vs bit-exact
/// lookup-only inference).
template <typename T>
class WeightlessBlockT {
public:
    WeightlessBlockT() = default;
    WeightlessBlockT(const WeightlessBlockConfig& cfg, Rng& rng);

    const WeightlessBlockConfig& config() const { return cfg_; }
    ThermometerEncoderT<T>& encoder() { return encoder_; }
    const ThermometerEncoderT<T>& encoder() const { return encoder_; }
    std::vector<LutLayerT<T>>& layers() { return layers_; }
    const std::vector<LutLayerT<T>>& layers() const { return layers_; }
    ConditionalSummationT<T>& summation() { return summation_; }
    const ConditionalSummationT<T>& summation() const { return summation_; }

    bool fitted() const { return encoder_.fitted(); }
    void fit_encoder(const TensorT<T>& calibration);

    /// Training-path forward over R rows; gradients per the mode's rules.
    TensorT<T> forward(TensorT<T> x, TrainingMode mode);
    TensorT<T> forward(TensorT<T> x) { return forward(x, cfg_.mode); }

    /// Bit-exact inference of one row (lookups and conditional adds only).
    void infer_row(const T* x, T* out) const;
    std::vector<T> infer_row(const std::vector<T>& x) const;
    /// Integer path for quantized blocks; equals the netlist interpreter.
    void infer_row_ints(const T* x, std::int32_t* out) const;

    /// Post-training freeze: quantize encoded values to int8 and snap
    /// thermometer thresholds to the comparator fixed-point grid.
    void quantize();
    bool quantized() const { return summation_.quant.has_value(); }

    void validate() const;

private:
    WeightlessBlockConfig cfg_;
    ThermometerEncoderT<T> encoder_;
    std::vector<LutLayerT<T>> layers_;
    ConditionalSummationT<T> summation_;
    mutable std::vector<std::uint8_t> scratch_;  // per-row bit buffers
};

using WeightlessBlock = WeightlessBlockT<float>;
using ConditionalSummation = ConditionalSummationT<float>;

}  // namespace quweit
