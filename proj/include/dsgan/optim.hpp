#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dsgan/error.hpp"
#include "dsgan/nn.hpp"

namespace dsgan {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    std::uint64_t step = 0;

    bool operator==(const AdamState&) const = default;
};

/// Bias-corrected Adam update. All gradients are checked before any parameter
/// is touched, so a non-finite gradient leaves parameters and moments intact.
template <class T>
void adam_step(std::span<Param<T>* const> params, AdamState<T>& state, const AdamConfig& cfg) {
    for (const auto* p : params)
        for (T g : p->grad)
            if (!std::isfinite(g)) throw NumericalError("adam_step: non-finite gradient in " + p->name);

    if (state.m.size() != params.size()) {
        state.m.clear();
        state.v.clear();
        for (const auto* p : params) {
            state.m.emplace_back(p->size(), T(0));
            state.v.emplace_back(p->size(), T(0));
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, t));
    const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, t));
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = *params[k];
        detail::require(state.m[k].size() == p.size(), "adam_step: moment shape mismatch for " + p.name);
        auto& m = state.m[k];
        auto& v = state.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const T g = p.grad[i];
            m[i] = b1 * m[i] + (T(1) - b1) * g;
            v[i] = b2 * v[i] + (T(1) - b2) * g * g;
            const T m_hat = m[i] / c1;
            const T v_hat = v[i] / c2;
            p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

}  // namespace dsgan
