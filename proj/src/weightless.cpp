#include "quweit/weightless.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "quweit/numeric.hpp"
#include "quweit/ops.hpp"

namespace quweit {

TrainingMode training_mode_from_string(const std::string& s) {
    if (s == "hard-efd") return TrainingMode::HardEfd;
    if (s == "soft") return TrainingMode::Soft;
    throw std::invalid_argument("unknown training mode '" + s + "' (expected hard-efd or soft)");
}

std::string to_string(TrainingMode m) {
    return m == TrainingMode::HardEfd ? "hard-efd" : "soft";
}

template <typename T>
void ConditionalSummationT<T>::validate() const {
    if (output_dim == 0 || group_size == 0)
        throw std::invalid_argument("conditional summation: D and G must be positive");
    if (!encoded.defined() || encoded.size() != output_dim * group_size)
        throw std::invalid_argument("conditional summation: encoded values shape mismatch");
    if (quant) {
        if (quant->levels.size() != encoded.size() || quant->dequant.size() != encoded.size())
            throw std::invalid_argument("conditional summation: quantization arrays shape mismatch");
        if (!(quant->scale > T(0))) throw std::invalid_argument("conditional summation: scale must be positive");
        for (std::size_t i = 0; i < encoded.size(); ++i)
            if (std::abs(double(quant->dequant[i]) - double(encoded.at(i))) > double(quant->scale) * 127)
                throw std::invalid_argument("conditional summation: dequantized value out of range");
    }
}

template <typename T>
ConditionalSummationT<T> ConditionalSummationT<T>::init(std::size_t output_dim, std::size_t group_size,
                                                        Rng& rng) {
    ConditionalSummationT cs;
    cs.output_dim = output_dim;
    cs.group_size = group_size;
    std::vector<T> e(output_dim * group_size);
    for (auto& v : e) v = T(rng.normal(0.0, 0.02));
    cs.encoded = TensorT<T>::from_data({output_dim, group_size}, std::move(e), true);
    return cs;
}

template <typename T>
void ConditionalSummationT<T>::infer_row(const std::uint8_t* bits, T* out) const {
    if (quant) {
        for (std::size_t d = 0; d < output_dim; ++d) {
            std::int32_t acc = 0;
            for (std::size_t g = 0; g < group_size; ++g)
                if (bits[d * group_size + g]) acc += quant->levels[d * group_size + g];
            out[d] = quant->scale * T(acc);
        }
    } else {
        const T* e = encoded.data().data();
        for (std::size_t d = 0; d < output_dim; ++d) {
            T acc(0);
            for (std::size_t g = 0; g < group_size; ++g)
                if (bits[d * group_size + g]) acc += e[d * group_size + g];
            out[d] = acc;
        }
    }
}

template <typename T>
void ConditionalSummationT<T>::infer_row_ints(const std::uint8_t* bits, std::int32_t* out) const {
    if (!quant) throw std::runtime_error("integer inference requires quantized encodings");
    for (std::size_t d = 0; d < output_dim; ++d) {
        std::int32_t acc = 0;
        for (std::size_t g = 0; g < group_size; ++g)
            if (bits[d * group_size + g]) acc += quant->levels[d * group_size + g];
        out[d] = acc;
    }
}

template <typename T>
ConditionalSummationT<T> quantize_encodings(const ConditionalSummationT<T>& cs) {
    ConditionalSummationT<T> out = cs;
    typename ConditionalSummationT<T>::Quantization q;
    T max_abs(0);
    for (std::size_t i = 0; i < cs.encoded.size(); ++i)
        max_abs = std::max(max_abs, std::abs(cs.encoded.at(i)));
    q.scale = max_abs > T(0) ? max_abs / T(127) : T(1);
    q.levels.resize(cs.encoded.size());
    q.dequant.resize(cs.encoded.size());
    for (std::size_t i = 0; i < cs.encoded.size(); ++i) {
        long long level = round_half_even(double(cs.encoded.at(i)) / double(q.scale));
        level = std::clamp(level, -127LL, 127LL);
        q.levels[i] = static_cast<std::int8_t>(level);
        q.dequant[i] = q.scale * T(level);
    }
    out.quant = std::move(q);
    out.validate();
    return out;
}

template <typename T>
TensorT<T> cond_sum_forward(TensorT<T> bits, ConditionalSummationT<T>& cs) {
    if (bits.cols() != cs.input_width())
        throw std::invalid_argument("conditional summation: input width " + std::to_string(bits.cols()) +
                                    " does not match D*G = " + std::to_string(cs.input_width()));
    const std::size_t rows = bits.rows(), d_count = cs.output_dim, gs = cs.group_size;
    auto out = TensorT<T>::zeros({rows, d_count});

    if (cs.quant) {
        // frozen block: reproduce the integer inference path exactly
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t d = 0; d < d_count; ++d) {
                std::int32_t acc = 0;
                for (std::size_t g = 0; g < gs; ++g)
                    if (bits.at2(r, d * gs + g) != T(0)) acc += cs.quant->levels[d * gs + g];
                out.at2(r, d) = cs.quant->scale * T(acc);
            }
        return out;  // post-training path, no gradients
    }

    const T* e = cs.encoded.data().data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t d = 0; d < d_count; ++d) {
            T acc(0);
            for (std::size_t g = 0; g < gs; ++g) {
                const T b = bits.at2(r, d * gs + g);
                if (b == T(1))
                    acc += e[d * gs + g];  // conditional add, exact match with infer_row
                else if (b != T(0))
                    acc += b * e[d * gs + g];  // soft mode
            }
            out.at2(r, d) = acc;
        }

    TensorT<T> encoded = cs.encoded;
    if (detail::should_record<T>({&bits, &encoded})) {
        detail::finish(out, [bits, encoded, out, rows, d_count, gs]() mutable {
            auto g = out.grad();
            const bool bits_tracked = bits.tracked();
            const bool e_tracked = encoded.tracked();
            auto ge = e_tracked ? encoded.grad() : std::span<T>{};
            auto gb = bits_tracked ? bits.grad() : std::span<T>{};
            const T* e = encoded.data().data();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t d = 0; d < d_count; ++d) {
                    const T up = g[r * d_count + d];
                    if (up == T(0)) continue;
                    for (std::size_t k = 0; k < gs; ++k) {
                        const std::size_t col = d * gs + k;
                        if (e_tracked) ge[col] += up * bits.at2(r, col);
                        if (bits_tracked) gb[r * d_count * gs + col] += up * e[col];
                    }
                }
        });
    }
    return out;
}

void WeightlessBlockConfig::validate() const {
    if (num_features == 0) throw std::invalid_argument("weightless config: F must be positive");
    if (bits_per_feature == 0) throw std::invalid_argument("weightless config: T must be positive");
    if (output_dim == 0 || group_size == 0)
        throw std::invalid_argument("weightless config: D and G must be positive");
    if (layer_widths.empty()) throw std::invalid_argument("weightless config: at least one LUT layer");
    for (auto w : layer_widths)
        if (w == 0) throw std::invalid_argument("weightless config: layer widths must be positive");
    if (layer_widths.back() != output_dim * group_size)
        throw std::invalid_argument("weightless config: final layer width " +
                                    std::to_string(layer_widths.back()) + " must equal D*G = " +
                                    std::to_string(output_dim * group_size));
    if (fan_in < 1 || fan_in > 6) throw std::invalid_argument("weightless config: fan-in outside 1..6");
    if (!(temperature > 0)) throw std::invalid_argument("weightless config: temperature must be positive");
}

template <typename T>
WeightlessBlockT<T>::WeightlessBlockT(const WeightlessBlockConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    std::size_t width = cfg.num_features * cfg.bits_per_feature;
    for (std::size_t w : cfg.layer_widths) {
        layers_.push_back(LutLayerT<T>::seeded(w, cfg.fan_in, width, rng));
        width = w;
    }
    summation_ = ConditionalSummationT<T>::init(cfg.output_dim, cfg.group_size, rng);
    // encoder stays unfitted until a calibration batch arrives
    encoder_.num_features = cfg.num_features;
    encoder_.bits_per_feature = cfg.bits_per_feature;
}

template <typename T>
void WeightlessBlockT<T>::fit_encoder(const TensorT<T>& calibration) {
    if (calibration.cols() != cfg_.num_features)
        throw std::invalid_argument("weightless block: calibration has " +
                                    std::to_string(calibration.cols()) + " features, expected " +
                                    std::to_string(cfg_.num_features));
    encoder_ = ThermometerEncoderT<T>::fit(calibration, cfg_.bits_per_feature);
}

template <typename T>
TensorT<T> WeightlessBlockT<T>::forward(TensorT<T> x, TrainingMode mode) {
    if (!fitted()) throw std::runtime_error("weightless block: encoder not fitted");
    if (mode == TrainingMode::Soft) {
        auto p = thermometer_encode_soft(x, encoder_);
        for (auto& layer : layers_) p = lut_forward_soft(p, layer, T(cfg_.temperature));
        return cond_sum_forward(p, summation_);
    }
    auto bits = thermometer_encode_hard(x, encoder_);
    for (auto& layer : layers_) bits = lut_forward_hard(bits, layer);
    return cond_sum_forward(bits, summation_);
}

template <typename T>
void WeightlessBlockT<T>::infer_row(const T* x, T* out) const {
    if (!fitted()) throw std::runtime_error("weightless block: encoder not fitted");
    std::size_t max_width = encoder_.output_width();
    for (const auto& l : layers_) max_width = std::max(max_width, l.num_luts);
    scratch_.resize(2 * max_width);
    std::uint8_t* cur = scratch_.data();
    std::uint8_t* nxt = scratch_.data() + max_width;
    encoder_.encode_row(x, cur);
    for (const auto& layer : layers_) {
        layer.infer_row(cur, nxt);
        std::swap(cur, nxt);
    }
    summation_.infer_row(cur, out);
}

template <typename T>
std::vector<T> WeightlessBlockT<T>::infer_row(const std::vector<T>& x) const {
    if (x.size() != cfg_.num_features)
        throw std::invalid_argument("weightless block: row has " + std::to_string(x.size()) +
                                    " features, expected " + std::to_string(cfg_.num_features));
    std::vector<T> out(cfg_.output_dim);
    infer_row(x.data(), out.data());
    return out;
}

template <typename T>
void WeightlessBlockT<T>::infer_row_ints(const T* x, std::int32_t* out) const {
    if (!fitted()) throw std::runtime_error("weightless block: encoder not fitted");
    std::size_t max_width = encoder_.output_width();
    for (const auto& l : layers_) max_width = std::max(max_width, l.num_luts);
    scratch_.resize(2 * max_width);
    std::uint8_t* cur = scratch_.data();
    std::uint8_t* nxt = scratch_.data() + max_width;
    encoder_.encode_row(x, cur);
    for (const auto& layer : layers_) {
        layer.infer_row(cur, nxt);
        std::swap(cur, nxt);
    }
    summation_.infer_row_ints(cur, out);
}

template <typename T>
void WeightlessBlockT<T>::quantize() {
    if (!fitted()) throw std::runtime_error("weightless block: cannot quantize before fitting");
    summation_ = quantize_encodings(summation_);
    encoder_.snap_to_fixed_point();
}

template <typename T>
void WeightlessBlockT<T>::validate() const {
    cfg_.validate();
    if (fitted()) encoder_.validate();
    std::size_t width = cfg_.num_features * cfg_.bits_per_feature;
    for (const auto& layer : layers_) {
        layer.validate();
        if (layer.input_width != width)
            throw std::invalid_argument("weightless block: layer input width chain broken");
        width = layer.num_luts;
    }
    if (width != summation_.input_width())
        throw std::invalid_argument("weightless block: final layer width does not feed D*G summation");
    summation_.validate();
}

template struct ConditionalSummationT<float>;
template struct ConditionalSummationT<double>;
template ConditionalSummationT<float> quantize_encodings(const ConditionalSummationT<float>&);
template ConditionalSummationT<double> quantize_encodings(const ConditionalSummationT<double>&);
template TensorT<float> cond_sum_forward(TensorT<float>, ConditionalSummationT<float>&);
template TensorT<double> cond_sum_forward(TensorT<double>, ConditionalSummationT<double>&);
template class WeightlessBlockT<float>;
template class WeightlessBlockT<double>;

}  // namespace quweit
