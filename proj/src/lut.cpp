#include "quweit/lut.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include "quweit/ops.hpp"

namespace quweit {

template <typename T>
void LutLayerT<T>::validate() const {
    if (num_luts == 0) throw std::invalid_argument("lut layer: L must be positive");
    if (fan_in < 1 || fan_in > 6)
        throw std::invalid_argument("lut layer: fan-in " + std::to_string(fan_in) + " outside 1..6");
    if (input_width < fan_in) throw std::invalid_argument("lut layer: input width below fan-in");
    if (mapping.size() != num_luts * fan_in) throw std::invalid_argument("lut layer: mapping size mismatch");
    for (std::size_t l = 0; l < num_luts; ++l) {
        std::set<std::int32_t> seen;
        for (std::size_t j = 0; j < fan_in; ++j) {
            const std::int32_t s = mapping[l * fan_in + j];
            if (s < 0 || static_cast<std::size_t>(s) >= input_width)
                throw std::invalid_argument("lut layer: mapping index " + std::to_string(s) +
                                            " outside [0, " + std::to_string(input_width) + ")");
            if (!seen.insert(s).second)
                throw std::invalid_argument("lut layer: duplicate source bit in LUT " + std::to_string(l));
        }
    }
    if (!theta.defined() || theta.size() != num_luts * table_size())
        throw std::invalid_argument("lut layer: theta shape mismatch");
    for (std::size_t i = 0; i < theta.size(); ++i)
        if (!std::isfinite(double(theta.at(i)))) throw std::invalid_argument("lut layer: non-finite theta");
}

template <typename T>
LutLayerT<T> LutLayerT<T>::seeded(std::size_t num_luts, std::size_t fan_in, std::size_t input_width,
                                  Rng& rng) {
    LutLayerT layer;
    layer.num_luts = num_luts;
    layer.fan_in = fan_in;
    layer.input_width = input_width;

    // Concatenate shuffled permutations of all source indices, then cut into
    // n-sized slices. Every source appears floor(L*n/width) times in the first
    // L*n draws, which gives the coverage guarantee.
    const std::size_t need = num_luts * fan_in;
    std::vector<std::int32_t> stream;
    stream.reserve(need + input_width);
    while (stream.size() < need) {
        std::vector<std::int32_t> perm(input_width);
        for (std::size_t i = 0; i < input_width; ++i) perm[i] = static_cast<std::int32_t>(i);
        for (std::size_t i = input_width; i > 1; --i)
            std::swap(perm[i - 1], perm[rng.below(i)]);
        stream.insert(stream.end(), perm.begin(), perm.end());
    }

    // A slice that straddles a permutation boundary may repeat a source;
    // swap the repeat with the nearest later element that keeps the slice distinct.
    for (std::size_t l = 0; l < num_luts; ++l) {
        const std::size_t base = l * fan_in;
        for (std::size_t j = 1; j < fan_in; ++j) {
            bool dup = true;
            while (dup) {
                dup = false;
                for (std::size_t k = 0; k < j; ++k)
                    if (stream[base + k] == stream[base + j]) {
                        dup = true;
                        break;
                    }
                if (dup) {
                    std::size_t swap_at = base + fan_in;
                    while (swap_at < stream.size()) {
                        bool clash = false;
                        for (std::size_t k = 0; k < fan_in; ++k)
                            if (k != j && stream[base + k] == stream[swap_at]) clash = true;
                        if (!clash) break;
                        ++swap_at;
                    }
                    if (swap_at >= stream.size())
                        throw std::runtime_error("lut mapping: cannot build distinct slice");
                    std::swap(stream[base + j], stream[swap_at]);
                }
            }
        }
    }
    layer.mapping.assign(stream.begin(), stream.begin() + need);

    std::vector<T> th(num_luts * layer.table_size());
    for (auto& v : th) v = T(rng.uniform(-1.0, 1.0));
    layer.theta = TensorT<T>::from_data({num_luts, layer.table_size()}, std::move(th), true);
    layer.validate();
    return layer;
}

template <typename T>
void LutLayerT<T>::infer_row(const std::uint8_t* bits_in, std::uint8_t* bits_out) const {
    const T* th = theta.data().data();
    const std::size_t ts = table_size();
    for (std::size_t l = 0; l < num_luts; ++l)
        bits_out[l] = (th[l * ts + address(bits_in, l)] > T(0)) ? 1 : 0;
}

template <typename T>
TensorT<T> lut_forward_hard(TensorT<T> bits, LutLayerT<T>& layer) {
    if (bits.cols() != layer.input_width)
        throw std::invalid_argument("lut forward: input width " + std::to_string(bits.cols()) +
                                    " does not match layer width " + std::to_string(layer.input_width));
    const std::size_t rows = bits.rows(), l_count = layer.num_luts, n = layer.fan_in;
    const std::size_t ts = layer.table_size();
    auto out = TensorT<T>::zeros({rows, l_count});

    std::vector<std::uint32_t> addrs(rows * l_count);
    {
        const T* pb = bits.data().data();
        const T* th = layer.theta.data().data();
        for (std::size_t r = 0; r < rows; ++r) {
            const T* row = pb + r * layer.input_width;
            for (std::size_t l = 0; l < l_count; ++l) {
                const std::int32_t* map = layer.mapping.data() + l * n;
                std::uint32_t addr = 0;
                for (std::size_t j = 0; j < n; ++j) addr = (addr << 1) | (row[map[j]] != T(0) ? 1u : 0u);
                addrs[r * l_count + l] = addr;
                out.at2(r, l) = (th[l * ts + addr] > T(0)) ? T(1) : T(0);
            }
        }
    }

    TensorT<T> theta = layer.theta;
    if (detail::should_record<T>({&bits, &theta})) {
        const std::vector<std::int32_t> mapping = layer.mapping;
        detail::finish(out, [bits, theta, out, addrs = std::move(addrs), mapping, rows, l_count, n,
                             ts]() mutable {
            auto g = out.grad();
            const T* th = theta.data().data();
            const bool bits_tracked = bits.tracked();
            const bool theta_tracked = theta.tracked();
            auto gth = theta_tracked ? theta.grad() : std::span<T>{};
            auto gb = bits_tracked ? bits.grad() : std::span<T>{};
            const std::size_t in_w = bits.cols();
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t l = 0; l < l_count; ++l) {
                    const T up = g[r * l_count + l];
                    if (up == T(0)) continue;
                    const std::uint32_t addr = addrs[r * l_count + l];
                    if (theta_tracked) {
                        // straight-through, clipped to |theta| <= 1
                        if (std::abs(th[l * ts + addr]) <= T(1)) gth[l * ts + addr] += up;
                    }
                    if (bits_tracked) {
                        const std::int32_t* map = mapping.data() + l * n;
                        for (std::size_t j = 0; j < n; ++j) {
                            const std::uint32_t bit = 1u << (n - 1 - j);
                            const T h1 = th[l * ts + (addr | bit)] > T(0) ? T(1) : T(0);
                            const T h0 = th[l * ts + (addr & ~bit)] > T(0) ? T(1) : T(0);
                            gb[r * in_w + map[j]] += up * (h1 - h0);
                        }
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> lut_forward_soft(TensorT<T> probs, LutLayerT<T>& layer, T tau) {
    if (probs.cols() != layer.input_width)
        throw std::invalid_argument("lut forward: input width " + std::to_string(probs.cols()) +
                                    " does not match layer width " + std::to_string(layer.input_width));
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const T p = probs.at(i);
        if (p < T(-1e-6) || p > T(1) + T(1e-6))
            throw std::invalid_argument("lut soft forward: input " + std::to_string(double(p)) +
                                        " outside [0, 1]");
    }
    const std::size_t rows = probs.rows(), l_count = layer.num_luts, n = layer.fan_in;
    const std::size_t ts = layer.table_size();
    auto out = TensorT<T>::zeros({rows, l_count});

    auto sigma = [](T z) { return T(1) / (T(1) + std::exp(-z)); };

    const T* pp = probs.data().data();
    const T* th = layer.theta.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = pp + r * layer.input_width;
        for (std::size_t l = 0; l < l_count; ++l) {
            const std::int32_t* map = layer.mapping.data() + l * n;
            T acc(0);
            for (std::uint32_t a = 0; a < ts; ++a) {
                T prod(1);
                for (std::size_t j = 0; j < n; ++j) {
                    const T pj = row[map[j]];
                    prod *= (a >> (n - 1 - j)) & 1u ? pj : T(1) - pj;
                }
                acc += sigma(th[l * ts + a] / tau) * prod;
            }
            out.at2(r, l) = acc;
        }
    }

    TensorT<T> theta = layer.theta;
    if (detail::should_record<T>({&probs, &theta})) {
        const std::vector<std::int32_t> mapping = layer.mapping;
        detail::finish(out, [probs, theta, out, mapping, rows, l_count, n, ts, tau, sigma]() mutable {
            auto g = out.grad();
            const T* th = theta.data().data();
            const T* pp = probs.data().data();
            const bool p_tracked = probs.tracked();
            const bool theta_tracked = theta.tracked();
            auto gth = theta_tracked ? theta.grad() : std::span<T>{};
            auto gp = p_tracked ? probs.grad() : std::span<T>{};
            const std::size_t in_w = probs.cols();
            for (std::size_t r = 0; r < rows; ++r) {
                const T* row = pp + r * in_w;
                for (std::size_t l = 0; l < l_count; ++l) {
                    const T up = g[r * l_count + l];
                    if (up == T(0)) continue;
                    const std::int32_t* map = mapping.data() + l * n;
                    for (std::uint32_t a = 0; a < ts; ++a) {
                        const T s = sigma(th[l * ts + a] / tau);
                        T prod(1);
                        for (std::size_t j = 0; j < n; ++j) {
                            const T pj = row[map[j]];
                            prod *= (a >> (n - 1 - j)) & 1u ? pj : T(1) - pj;
                        }
                        if (theta_tracked) gth[l * ts + a] += up * s * (T(1) - s) / tau * prod;
                        if (p_tracked) {
                            for (std::size_t j = 0; j < n; ++j) {
                                T partial(1);
                                for (std::size_t k = 0; k < n; ++k) {
                                    if (k == j) continue;
                                    const T pk = row[map[k]];
                                    partial *= (a >> (n - 1 - k)) & 1u ? pk : T(1) - pk;
                                }
                                const T sign = (a >> (n - 1 - j)) & 1u ? T(1) : T(-1);
                                gp[r * in_w + map[j]] += up * s * sign * partial;
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

template struct LutLayerT<float>;
template struct LutLayerT<double>;
template TensorT<float> lut_forward_hard(TensorT<float>, LutLayerT<float>&);
template TensorT<double> lut_forward_hard(TensorT<double>, LutLayerT<double>&);
template TensorT<float> lut_forward_soft(TensorT<float>, LutLayerT<float>&, float);
template TensorT<double> lut_forward_soft(TensorT<double>, LutLayerT<double>&, double);

}  // namespace quweit
