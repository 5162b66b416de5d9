#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "quweit/tensor.hpp"

namespace quweit {

/// Reverse-mode gradient tape. Operations append a backward closure while a
/// tape is active; backward() replays them once in reverse order. A tape is
/// single-use: it must be reset() before the next forward pass.
///
/// Custom-gradient operations (the weightless block) use exactly the same
/// record() hook as the built-in ops.
template <typename T>
class TapeT {
public:
    using BackwardFn = std::function<void()>;

    TapeT() = default;
    TapeT(const TapeT&) = delete;
    TapeT& operator=(const TapeT&) = delete;

    void record(BackwardFn fn) { records_.push_back(std::move(fn)); }

    std::size_t num_records() const { return records_.size(); }
    bool consumed() const { return consumed_; }

    /// Seeds d(loss)/d(loss) = 1 and replays every record in reverse order.
    /// Each record runs exactly once; gradients accumulate additively.
    void backward(TensorT<T> loss) {
        if (consumed_)
            throw std::runtime_error("tape already consumed by backward(); reset() and re-run forward");
        if (!loss.defined() || loss.size() != 1)
            throw std::runtime_error("backward() requires a scalar loss tensor");
        if (!loss.tracked())
            throw std::runtime_error("backward() on a detached tensor: loss was not produced on the tape");
        consumed_ = true;
        loss.grad()[0] += T(1);
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
    }

    void reset() {
        records_.clear();
        consumed_ = false;
    }

    static TapeT* current() { return current_; }

    /// RAII activation: ops record onto the innermost active tape.
    class Scope {
    public:
        explicit Scope(TapeT& tape) : prev_(current_) { current_ = &tape; }
        ~Scope() { current_ = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        TapeT* prev_;
    };

private:
    std::vector<BackwardFn> records_;
    bool consumed_ = false;
    static thread_local TapeT* current_;
};

template <typename T>
thread_local TapeT<T>* TapeT<T>::current_ = nullptr;

using Tape = TapeT<float>;

}  // namespace quweit
