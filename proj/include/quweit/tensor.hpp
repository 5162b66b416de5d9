#pragma once

#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace quweit {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

namespace detail {

template <typename T>
struct TensorStorage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;       // allocated lazily, same length as data
    bool requires_grad = false;
    bool tracked = false;      // produced by (or feeding) a recorded op

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
    }
};

}  // namespace detail

/// Dense row-major tensor handle with shared storage. The scalar type is a
/// template parameter: float for regular builds, double for the
/// finite-difference gradient suites.
template <typename T>
class TensorT {
public:
    using Scalar = T;

    TensorT() = default;

    static TensorT zeros(Shape shape, bool requires_grad = false) {
        return TensorT(std::move(shape), {}, requires_grad, /*fill=*/true, T(0));
    }

    static TensorT full(Shape shape, T value, bool requires_grad = false) {
        return TensorT(std::move(shape), {}, requires_grad, /*fill=*/true, value);
    }

    static TensorT from_data(Shape shape, std::vector<T> values, bool requires_grad = false) {
        if (values.size() != shape_numel(shape))
            throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                        " does not match shape " + shape_str(shape));
        return TensorT(std::move(shape), std::move(values), requires_grad, false, T(0));
    }

    static TensorT scalar(T value, bool requires_grad = false) {
        return from_data({1}, {value}, requires_grad);
    }

    bool defined() const { return st_ != nullptr; }

    const Shape& shape() const { return st_->shape; }
    std::size_t ndim() const { return st_->shape.size(); }
    std::size_t size() const { return st_->data.size(); }
    std::size_t extent(std::size_t axis) const { return st_->shape.at(axis); }

    // 2-D conveniences; a 1-D tensor is treated as a single row.
    std::size_t rows() const { return ndim() >= 2 ? st_->shape[0] : 1; }
    std::size_t cols() const { return ndim() >= 2 ? st_->shape[1] : size(); }

    std::span<T> data() { return {st_->data.data(), st_->data.size()}; }
    std::span<const T> data() const { return {st_->data.data(), st_->data.size()}; }

    T& at(std::size_t i) { return st_->data[i]; }
    T at(std::size_t i) const { return st_->data[i]; }
    T& at2(std::size_t r, std::size_t c) { return st_->data[r * cols() + c]; }
    T at2(std::size_t r, std::size_t c) const { return st_->data[r * cols() + c]; }

    T item() const {
        if (size() != 1) throw std::runtime_error("item() on non-scalar tensor " + shape_str(shape()));
        return st_->data[0];
    }

    bool requires_grad() const { return st_->requires_grad; }
    void set_requires_grad(bool rq) {
        st_->requires_grad = rq;
        if (rq) st_->ensure_grad();
    }

    /// True if gradients should flow into/out of this tensor.
    bool tracked() const { return defined() && (st_->requires_grad || st_->tracked); }
    void mark_tracked() {
        st_->tracked = true;
        st_->ensure_grad();
    }

    bool has_grad() const { return defined() && !st_->grad.empty(); }
    std::span<T> grad() {
        st_->ensure_grad();
        return {st_->grad.data(), st_->grad.size()};
    }
    std::span<const T> grad() const {
        if (st_->grad.empty()) throw std::runtime_error("gradient not allocated");
        return {st_->grad.data(), st_->grad.size()};
    }

    void zero_grad() {
        if (!st_->grad.empty()) std::fill(st_->grad.begin(), st_->grad.end(), T(0));
    }

    /// Identity comparison (same storage).
    bool same_as(const TensorT& other) const { return st_ == other.st_; }

private:
    TensorT(Shape shape, std::vector<T> values, bool requires_grad, bool fill, T fill_value)
        : st_(std::make_shared<detail::TensorStorage<T>>()) {
        st_->shape = std::move(shape);
        if (fill)
            st_->data.assign(shape_numel(st_->shape), fill_value);
        else
            st_->data = std::move(values);
        st_->requires_grad = requires_grad;
        if (requires_grad) st_->ensure_grad();
    }

    std::shared_ptr<detail::TensorStorage<T>> st_;
};

using Tensor = TensorT<float>;

}  // namespace quweit
