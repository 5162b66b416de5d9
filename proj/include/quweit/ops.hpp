#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "quweit/tape.hpp"
#include "quweit/tensor.hpp"

namespace quweit {

namespace detail {

template <typename T>
using EigenMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<EigenMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const EigenMat<T>>;

template <typename T>
inline bool should_record(std::initializer_list<const TensorT<T>*> inputs) {
    if (TapeT<T>::current() == nullptr) return false;
    for (const auto* in : inputs)
        if (in->tracked()) return true;
    return false;
}

template <typename T>
inline void finish(TensorT<T>& out, typename TapeT<T>::BackwardFn fn) {
    out.mark_tracked();
    TapeT<T>::current()->record(std::move(fn));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and structural ops
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> add(TensorT<T> a, TensorT<T> b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    auto out = TensorT<T>::zeros(a.shape());
    auto* o = out.data().data();
    const auto* pa = a.data().data();
    const auto* pb = b.data().data();
    for (std::size_t i = 0; i < a.size(); ++i) o[i] = pa[i] + pb[i];
    if (detail::should_record<T>({&a, &b})) {
        detail::finish(out, [a, b, out]() mutable {
            auto g = out.grad();
            if (a.tracked()) {
                auto ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (b.tracked()) {
                auto gb = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> mul(TensorT<T> a, TensorT<T> b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    auto out = TensorT<T>::zeros(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.at(i) = a.at(i) * b.at(i);
    if (detail::should_record<T>({&a, &b})) {
        detail::finish(out, [a, b, out]() mutable {
            auto g = out.grad();
            if (a.tracked()) {
                auto ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.at(i);
            }
            if (b.tracked()) {
                auto gb = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.at(i);
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> scale(TensorT<T> a, T s) {
    auto out = TensorT<T>::zeros(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.at(i) = a.at(i) * s;
    if (detail::should_record<T>({&a})) {
        detail::finish(out, [a, out, s]() mutable {
            auto g = out.grad();
            auto ga = a.grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
        });
    }
    return out;
}

template <typename T>
TensorT<T> matmul(TensorT<T> a, TensorT<T> b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    auto out = TensorT<T>::zeros({m, n});
    detail::ConstMatMap<T> ma(a.data().data(), m, k);
    detail::ConstMatMap<T> mb(b.data().data(), k, n);
    detail::MatMap<T> mo(out.data().data(), m, n);
    mo.noalias() = ma * mb;
    if (detail::should_record<T>({&a, &b})) {
        detail::finish(out, [a, b, out, m, k, n]() mutable {
            detail::ConstMatMap<T> g(out.grad().data(), m, n);
            if (a.tracked()) {
                detail::ConstMatMap<T> mb(b.data().data(), k, n);
                detail::MatMap<T> ga(a.grad().data(), m, k);
                ga.noalias() += g * mb.transpose();
            }
            if (b.tracked()) {
                detail::ConstMatMap<T> ma(a.data().data(), m, k);
                detail::MatMap<T> gb(b.grad().data(), k, n);
                gb.noalias() += ma.transpose() * g;
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> transpose(TensorT<T> a) {
    if (a.ndim() != 2) throw std::invalid_argument("transpose: expected 2-D, got " + shape_str(a.shape()));
    const std::size_t r = a.rows(), c = a.cols();
    auto out = TensorT<T>::zeros({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at2(j, i) = a.at2(i, j);
    if (detail::should_record<T>({&a})) {
        detail::finish(out, [a, out, r, c]() mutable {
            auto g = out.grad();
            auto ga = a.grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
        });
    }
    return out;
}

template <typename T>
TensorT<T> slice_rows(TensorT<T> a, std::size_t start, std::size_t count) {
    if (a.ndim() != 2 || start + count > a.rows())
        throw std::invalid_argument("slice_rows: range [" + std::to_string(start) + ", " +
                                    std::to_string(start + count) + ") out of " + shape_str(a.shape()));
    const std::size_t c = a.cols();
    auto out = TensorT<T>::zeros({count, c});
    std::copy_n(a.data().data() + start * c, count * c, out.data().data());
    if (detail::should_record<T>({&a})) {
        detail::finish(out, [a, out, start, count, c]() mutable {
            auto g = out.grad();
            auto ga = a.grad();
            for (std::size_t i = 0; i < count * c; ++i) ga[start * c + i] += g[i];
        });
    }
    return out;
}

template <typename T>
TensorT<T> slice_cols(TensorT<T> a, std::size_t start, std::size_t count) {
    if (a.ndim() != 2 || start + count > a.cols())
        throw std::invalid_argument("slice_cols: range [" + std::to_string(start) + ", " +
                                    std::to_string(start + count) + ") out of " + shape_str(a.shape()));
    const std::size_t r = a.rows(), c = a.cols();
    auto out = TensorT<T>::zeros({r, count});
    for (std::size_t i = 0; i < r; ++i)
        std::copy_n(a.data().data() + i * c + start, count, out.data().data() + i * count);
    if (detail::should_record<T>({&a})) {
        detail::finish(out, [a, out, start, count, r, c]() mutable {
            auto g = out.grad();
            auto ga = a.grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < count; ++j) ga[i * c + start + j] += g[i * count + j];
        });
    }
    return out;
}

template <typename T>
TensorT<T> concat_cols(std::vector<TensorT<T>> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const std::size_t r = parts[0].rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.ndim() != 2 || p.rows() != r)
            throw std::invalid_argument("concat_cols: row mismatch at " + shape_str(p.shape()));
        total += p.cols();
    }
    auto out = TensorT<T>::zeros({r, total});
    std::size_t off = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < r; ++i)
            std::copy_n(p.data().data() + i * p.cols(), p.cols(), out.data().data() + i * total + off);
        off += p.cols();
    }
    bool rec = false;
    for (const auto& p : parts)
        if (detail::should_record<T>({&p})) rec = true;
    if (rec) {
        detail::finish(out, [parts, out, r, total]() mutable {
            auto g = out.grad();
            std::size_t off = 0;
            for (auto& p : parts) {
                if (p.tracked()) {
                    auto gp = p.grad();
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < p.cols(); ++j)
                            gp[i * p.cols() + j] += g[i * total + off + j];
                }
                off += p.cols();
            }
        });
    }
    return out;
}

template <typename T>
TensorT<T> concat_rows(std::vector<TensorT<T>> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    const std::size_t c = parts[0].cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.ndim() != 2 || p.cols() != c)
            throw std::invalid_argument("concat_rows: column mismatch at " + shape_str(p.shape()));
        total += p.rows();
    }
    auto out = TensorT<T>::zeros({total, c});
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy_n(p.data().data(), p.size(), out.data().data() + off * c);
        off += p.rows();
    }
    bool rec = false;
    for (const auto& p : parts)
        if (detail::should_record<T>({&p})) rec = true;
    if (rec) {
        detail::finish(out, [parts, out, c]() mutable {
            auto g = out.grad();
            std::size_t off = 0;
            for (auto& p : parts) {
                if (p.tracked()) {
                    auto gp = p.grad();
                    for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g[off * c + i];
                }
                off += p.rows();
            }
        });
    }
    return out;
}

/// Row gather from an embedding table [V x D]; backward scatter-adds.
template <typename T>
TensorT<T> embedding(TensorT<T> table, const std::vector<std::int32_t>& ids) {
    if (table.ndim() != 2) throw std::invalid_argument("embedding: table must be 2-D");
    const std::size_t v = table.rows(), d = table.cols();
    auto out = TensorT<T>::zeros({ids.size(), d});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
            throw std::out_of_range("embedding: id " + std::to_string(ids[i]) + " outside [0, " +
                                    std::to_string(v) + ")");
        std::copy_n(table.data().data() + static_cast<std::size_t>(ids[i]) * d, d,
                    out.data().data() + i * d);
    }
    if (detail::should_record<T>({&table})) {
        detail::finish(out, [table, out, ids, d]() mutable {
            auto g = out.grad();
            auto gt = table.grad();
            for (std::size_t i = 0; i < ids.size(); ++i)
                for (std::size_t j = 0; j < d; ++j)
                    gt[static_cast<std::size_t>(ids[i]) * d + j] += g[i * d + j];
        });
    }
    return out;
}

template <typename T>
TensorT<T> sum(TensorT<T> a) {
    T acc(0);
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.at(i);
    auto out = TensorT<T>::scalar(acc);
    if (detail::should_record<T>({&a})) {
        detail::finish(out, [a, out]() mutable {
            const T g = out.grad()[0];
            auto ga = a.grad();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Nonlinearities and normalization
// ---------------------------------------------------------------------------

/// Exact Gaussian-CDF GELU: x * Phi(x).
template <typename T>
TensorT<T> gelu(TensorT<T> a) {
    constexpr T kInvSqrt2 = T(0.70710678118654752440);
    constexpr T kInvSqrt2Pi = T(0.39894228040143267794);
    auto out = TensorT<T>::zeros(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const T x = a.at(i);
        out.at(i) = x * T(0.5) * (T(1) + std::erf(x * kInvSqrt2));
    }
    if (detail::should_record<T>({&a})) {
        detail::finish(out, [a, out, kInvSqrt2, kInvSqrt2Pi]() mutable {
            auto g = out.grad();
            auto ga = a.grad();
            for (std::size_t i = 0; i < ga.size(); ++i) {
                const T x = a.at(i);
                const T phi = T(0.5) * (T(1) + std::erf(x * kInvSqrt2));
                const T pdf = kInvSqrt2Pi * std::exp(T(-0.5) * x * x);
                ga[i] += g[i] * (phi + x * pdf);
            }
        });
    }
    return out;
}

/// Per-row normalization over the last extent, then affine gain/bias.
template <typename T>
TensorT<T> layer_norm(TensorT<T> x, TensorT<T> gain, TensorT<T> bias, T eps) {
    if (x.ndim() < 1) throw std::invalid_argument("layer_norm: scalar input");
    if (eps <= T(0)) throw std::invalid_argument("layer_norm: eps must be positive");
    const std::size_t d = x.shape().back();
    if (gain.size() != d || bias.size() != d)
        throw std::invalid_argument("layer_norm: gain/bias length " + std::to_string(gain.size()) + "/" +
                                    std::to_string(bias.size()) + " does not match last extent " +
                                    std::to_string(d));
    const std::size_t rows = x.size() / d;
    auto out = TensorT<T>::zeros(x.shape());
    std::vector<T> xhat(x.size());
    std::vector<T> inv_sigma(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* px = x.data().data() + r * d;
        T mean(0);
        for (std::size_t j = 0; j < d; ++j) mean += px[j];
        mean /= T(d);
        T var(0);
        for (std::size_t j = 0; j < d; ++j) var += (px[j] - mean) * (px[j] - mean);
        var /= T(d);
        const T inv = T(1) / std::sqrt(var + eps);
        inv_sigma[r] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            const T h = (px[j] - mean) * inv;
            xhat[r * d + j] = h;
            out.at(r * d + j) = h * gain.at(j) + bias.at(j);
        }
    }
    if (detail::should_record<T>({&x, &gain, &bias})) {
        detail::finish(out, [x, gain, bias, out, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma),
                             rows, d]() mutable {
            auto g = out.grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const T* h = xhat.data() + r * d;
                const T* gy = g.data() + r * d;
                if (gain.tracked()) {
                    auto gg = gain.grad();
                    for (std::size_t j = 0; j < d; ++j) gg[j] += gy[j] * h[j];
                }
                if (bias.tracked()) {
                    auto gb = bias.grad();
                    for (std::size_t j = 0; j < d; ++j) gb[j] += gy[j];
                }
                if (x.tracked()) {
                    T mean_dh(0), mean_dh_h(0);
                    for (std::size_t j = 0; j < d; ++j) {
                        const T dh = gy[j] * gain.at(j);
                        mean_dh += dh;
                        mean_dh_h += dh * h[j];
                    }
                    mean_dh /= T(d);
                    mean_dh_h /= T(d);
                    auto gx = x.grad();
                    for (std::size_t j = 0; j < d; ++j) {
                        const T dh = gy[j] * gain.at(j);
                        gx[r * d + j] += (dh - mean_dh - h[j] * mean_dh_h) * inv_sigma[r];
                    }
                }
            }
        });
    }
    return out;
}

/// Shift-by-max softmax along the given axis; lines sum to 1.
template <typename T>
TensorT<T> softmax(TensorT<T> x, std::size_t axis) {
    if (axis >= x.ndim())
        throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " invalid for " +
                                    shape_str(x.shape()));
    const std::size_t len = x.shape()[axis];
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
    for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.shape()[i];
    auto out = TensorT<T>::zeros(x.shape());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * len * inner + i;
            T mx = -std::numeric_limits<T>::infinity();
            for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, x.at(base + k * inner));
            T denom(0);
            for (std::size_t k = 0; k < len; ++k) {
                const T e = std::exp(x.at(base + k * inner) - mx);
                out.at(base + k * inner) = e;
                denom += e;
            }
            for (std::size_t k = 0; k < len; ++k) out.at(base + k * inner) /= denom;
        }
    }
    if (detail::should_record<T>({&x})) {
        detail::finish(out, [x, out, outer, inner, len]() mutable {
            auto g = out.grad();
            auto gx = x.grad();
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t i = 0; i < inner; ++i) {
                    const std::size_t base = o * len * inner + i;
                    T dot(0);
                    for (std::size_t k = 0; k < len; ++k)
                        dot += g[base + k * inner] * out.at(base + k * inner);
                    for (std::size_t k = 0; k < len; ++k)
                        gx[base + k * inner] +=
                            (g[base + k * inner] - dot) * out.at(base + k * inner);
                }
            }
        });
    }
    return out;
}

/// Masks strictly-future positions of a square score matrix with -inf.
template <typename T>
TensorT<T> causal_mask(TensorT<T> scores) {
    if (scores.ndim() != 2 || scores.rows() != scores.cols())
        throw std::invalid_argument("causal_mask: expected square matrix, got " + shape_str(scores.shape()));
    const std::size_t n = scores.rows();
    auto out = TensorT<T>::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.at2(i, j) = (j > i) ? -std::numeric_limits<T>::infinity() : scores.at2(i, j);
    if (detail::should_record<T>({&scores})) {
        detail::finish(out, [scores, out, n]() mutable {
            auto g = out.grad();
            auto gs = scores.grad();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j <= i; ++j) gs[i * n + j] += g[i * n + j];
        });
    }
    return out;
}

/// Mean negative log-likelihood of integer targets under softmax(logits).
/// Backward is the closed form (softmax - one_hot) / num_rows.
template <typename T>
TensorT<T> cross_entropy(TensorT<T> logits, const std::vector<std::int32_t>& targets) {
    if (logits.ndim() != 2) throw std::invalid_argument("cross_entropy: logits must be 2-D");
    const std::size_t rows = logits.rows(), v = logits.cols();
    if (targets.size() != rows)
        throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                                    std::to_string(rows) + " rows");
    std::vector<T> probs(logits.size());
    T nll(0);
    for (std::size_t r = 0; r < rows; ++r) {
        if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= v)
            throw std::out_of_range("cross_entropy: target " + std::to_string(targets[r]) +
                                    " outside [0, " + std::to_string(v) + ")");
        const T* row = logits.data().data() + r * v;
        T mx = row[0];
        for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        T denom(0);
        for (std::size_t j = 0; j < v; ++j) {
            probs[r * v + j] = std::exp(row[j] - mx);
            denom += probs[r * v + j];
        }
        for (std::size_t j = 0; j < v; ++j) probs[r * v + j] /= denom;
        nll -= std::log(probs[r * v + static_cast<std::size_t>(targets[r])]);
    }
    auto out = TensorT<T>::scalar(nll / T(rows));
    if (detail::should_record<T>({&logits})) {
        detail::finish(out, [logits, out, targets, probs = std::move(probs), rows, v]() mutable {
            const T g = out.grad()[0];
            auto gl = logits.grad();
            const T inv = T(1) / T(rows);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < v; ++j) {
                    T p = probs[r * v + j];
                    if (static_cast<std::size_t>(targets[r]) == j) p -= T(1);
                    gl[r * v + j] += g * p * inv;
                }
        });
    }
    return out;
}

}  // namespace quweit
