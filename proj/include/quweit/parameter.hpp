#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "quweit/tensor.hpp"

namespace quweit {

/// A named trainable tensor. lr_mult scales the learning rate for this
/// parameter; decay selects the weight-decay group.
struct Parameter {
    std::string name;
    Tensor tensor;
    float lr_mult = 1.0f;
    bool decay = true;
};

class ParameterStore {
public:
    /// Registers a trainable tensor and returns its (shared) handle.
    Tensor add(std::string name, Tensor t, float lr_mult = 1.0f, bool decay = true) {
        if (!(lr_mult > 0)) throw std::invalid_argument("parameter " + name + ": lr multiplier must be > 0");
        for (const auto& p : params_)
            if (p.name == name) throw std::invalid_argument("duplicate parameter name '" + name + "'");
        t.set_requires_grad(true);
        params_.push_back(Parameter{std::move(name), t, lr_mult, decay});
        return t;
    }

    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }

    Parameter& find(const std::string& name) {
        for (auto& p : params_)
            if (p.name == name) return p;
        throw std::out_of_range("no parameter named '" + name + "'");
    }

    std::size_t total_elements() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.tensor.size();
        return n;
    }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

private:
    std::vector<Parameter> params_;
};

}  // namespace quweit
