#include "quweit/thermometer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "quweit/numeric.hpp"
#include "quweit/ops.hpp"

namespace quweit {

// Acklam's rational approximation of the standard normal quantile,
// refined with one Halley step (absolute error well below 1e-12).
double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01,  -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= phigh) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        const double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2 * 3.14159265358979323846) * std::exp(x * x / 2);
    return x - u / (1 + x * u / 2);
}

template <typename T>
void ThermometerEncoderT<T>::validate() const {
    if (num_features == 0 || bits_per_feature == 0)
        throw std::invalid_argument("thermometer: F and T must be positive");
    if (thresholds.size() != num_features * bits_per_feature)
        throw std::invalid_argument("thermometer: threshold matrix size mismatch");
    for (std::size_t f = 0; f < num_features; ++f)
        for (std::size_t t = 0; t + 1 < bits_per_feature; ++t)
            if (!(threshold(f, t) < threshold(f, t + 1)))
                throw std::invalid_argument("thermometer: thresholds not strictly increasing at feature " +
                                            std::to_string(f));
    if (!(surrogate_width > T(0)))
        throw std::invalid_argument("thermometer: surrogate width must be positive");
}

template <typename T>
void ThermometerEncoderT<T>::encode_row(const T* x, std::uint8_t* bits) const {
    for (std::size_t f = 0; f < num_features; ++f) {
        const T v = x[f];
        const T* thr = thresholds.data() + f * bits_per_feature;
        for (std::size_t t = 0; t < bits_per_feature; ++t)
            bits[f * bits_per_feature + t] = (v >= thr[t]) ? 1 : 0;
    }
}

template <typename T>
ThermometerEncoderT<T> ThermometerEncoderT<T>::fit(const TensorT<T>& calibration,
                                                   std::size_t bits_per_feature) {
    if (bits_per_feature < 1) throw std::invalid_argument("thermometer fit: T must be >= 1");
    if (!calibration.defined() || calibration.size() == 0)
        throw std::invalid_argument("thermometer fit: empty calibration batch");
    if (calibration.ndim() != 2 || calibration.rows() < 2)
        throw std::invalid_argument("thermometer fit: calibration must be [S x F] with S >= 2");
    const std::size_t s = calibration.rows(), f_count = calibration.cols();

    ThermometerEncoderT enc;
    enc.num_features = f_count;
    enc.bits_per_feature = bits_per_feature;
    enc.thresholds.resize(f_count * bits_per_feature);

    for (std::size_t f = 0; f < f_count; ++f) {
        double mean = 0;
        for (std::size_t r = 0; r < s; ++r) mean += calibration.at2(r, f);
        mean /= double(s);
        double var = 0;
        for (std::size_t r = 0; r < s; ++r) {
            const double d = calibration.at2(r, f) - mean;
            var += d * d;
        }
        var /= double(s);
        const double sd = std::sqrt(var);
        T* thr = enc.thresholds.data() + f * bits_per_feature;
        if (sd > 0) {
            for (std::size_t t = 0; t < bits_per_feature; ++t)
                thr[t] = T(mean + sd * normal_quantile(double(t + 1) / double(bits_per_feature + 1)));
        } else {
            // degenerate spread: uniform thresholds over [c-1, c+1]
            for (std::size_t t = 0; t < bits_per_feature; ++t)
                thr[t] = T(mean - 1.0 + 2.0 * double(t + 1) / double(bits_per_feature + 1));
        }
    }

    // surrogate width: mean adjacent-threshold gap
    if (bits_per_feature > 1) {
        double acc = 0;
        std::size_t cnt = 0;
        for (std::size_t f = 0; f < f_count; ++f)
            for (std::size_t t = 0; t + 1 < bits_per_feature; ++t, ++cnt)
                acc += enc.threshold(f, t + 1) - enc.threshold(f, t);
        enc.surrogate_width = T(acc / double(cnt));
    } else {
        enc.surrogate_width = T(1);
    }
    enc.validate();
    return enc;
}

template <typename T>
void ThermometerEncoderT<T>::snap_to_fixed_point() {
    for (std::size_t f = 0; f < num_features; ++f) {
        T* thr = thresholds.data() + f * bits_per_feature;
        for (std::size_t t = 0; t < bits_per_feature; ++t)
            thr[t] = T(fixed::to_real(fixed::from_real(double(thr[t]))));
        // snapping can collapse closely spaced thresholds; restore strict increase
        for (std::size_t t = 1; t < bits_per_feature; ++t)
            while (thr[t] <= thr[t - 1]) thr[t] = T(double(thr[t]) + 1.0 / fixed::kScale);
    }
    validate();
}

template <typename T>
TensorT<T> thermometer_encode_hard(TensorT<T> x, const ThermometerEncoderT<T>& enc) {
    if (!enc.fitted()) throw std::runtime_error("thermometer encode: encoder not fitted");
    if (x.cols() != enc.num_features)
        throw std::invalid_argument("thermometer encode: input has " + std::to_string(x.cols()) +
                                    " features, encoder expects " + std::to_string(enc.num_features));
    const std::size_t rows = x.rows(), f_count = enc.num_features, tb = enc.bits_per_feature;
    auto out = TensorT<T>::zeros({rows, f_count * tb});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t f = 0; f < f_count; ++f) {
            const T v = x.at2(r, f);
            for (std::size_t t = 0; t < tb; ++t)
                out.at2(r, f * tb + t) = (v >= enc.threshold(f, t)) ? T(1) : T(0);
        }
    if (detail::should_record<T>({&x})) {
        const std::vector<T> thr = enc.thresholds;
        const T w = enc.surrogate_width;
        detail::finish(out, [x, out, thr, w, rows, f_count, tb]() mutable {
            auto g = out.grad();
            auto gx = x.grad();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t f = 0; f < f_count; ++f) {
                    const T v = x.at2(r, f);
                    T acc(0);
                    for (std::size_t t = 0; t < tb; ++t) {
                        const T dist = std::abs(v - thr[f * tb + t]) / w;
                        if (dist < T(1)) acc += g[r * f_count * tb + f * tb + t] * (T(1) - dist) / w;
                    }
                    gx[r * f_count + f] += acc;
                }
        });
    }
    return out;
}

template <typename T>
TensorT<T> thermometer_encode_soft(TensorT<T> x, const ThermometerEncoderT<T>& enc) {
    if (!enc.fitted()) throw std::runtime_error("thermometer encode: encoder not fitted");
    if (x.cols() != enc.num_features)
        throw std::invalid_argument("thermometer encode: input has " + std::to_string(x.cols()) +
                                    " features, encoder expects " + std::to_string(enc.num_features));
    const std::size_t rows = x.rows(), f_count = enc.num_features, tb = enc.bits_per_feature;
    const T slope = T(4) / enc.surrogate_width;  // sigmoid slope at tau = 1/w
    auto out = TensorT<T>::zeros({rows, f_count * tb});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t f = 0; f < f_count; ++f)
            for (std::size_t t = 0; t < tb; ++t) {
                const T z = (x.at2(r, f) - enc.threshold(f, t)) * slope;
                out.at2(r, f * tb + t) = T(1) / (T(1) + std::exp(-z));
            }
    if (detail::should_record<T>({&x})) {
        detail::finish(out, [x, out, slope, rows, f_count, tb]() mutable {
            auto g = out.grad();
            auto gx = x.grad();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t f = 0; f < f_count; ++f) {
                    T acc(0);
                    for (std::size_t t = 0; t < tb; ++t) {
                        const T p = out.at2(r, f * tb + t);
                        acc += g[r * f_count * tb + f * tb + t] * p * (T(1) - p) * slope;
                    }
                    gx[r * f_count + f] += acc;
                }
        });
    }
    return out;
}

template struct ThermometerEncoderT<float>;
template struct ThermometerEncoderT<double>;
template TensorT<float> thermometer_encode_hard(TensorT<float>, const ThermometerEncoderT<float>&);
template TensorT<double> thermometer_encode_hard(TensorT<double>, const ThermometerEncoderT<double>&);
template TensorT<float> thermometer_encode_soft(TensorT<float>, const ThermometerEncoderT<float>&);
template TensorT<double> thermometer_encode_soft(TensorT<double>, const ThermometerEncoderT<double>&);

}  // namespace quweit
