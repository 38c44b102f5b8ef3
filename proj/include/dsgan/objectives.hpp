#pragma once

// Adversarial and pretext losses with closed-form gradients.
//
// Every loss takes raw (non-transformed) discriminator outputs and returns the
// value together with its gradient with respect to those outputs; expectations
// are batch means.

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dsgan/error.hpp"
#include "dsgan/tensor.hpp"

namespace dsgan {

enum class AdversarialKind { standard, lsq, hinge, ralsq };

inline std::string_view to_string(AdversarialKind k) {
    switch (k) {
        case AdversarialKind::standard: return "standard";
        case AdversarialKind::lsq: return "lsq";
        case AdversarialKind::hinge: return "hinge";
        case AdversarialKind::ralsq: return "ralsq";
    }
    return "?";
}

inline AdversarialKind parse_adversarial_kind(std::string_view s) {
    if (s == "standard") return AdversarialKind::standard;
    if (s == "lsq") return AdversarialKind::lsq;
    if (s == "hinge") return AdversarialKind::hinge;
    if (s == "ralsq") return AdversarialKind::ralsq;
    throw std::invalid_argument("unknown objective '" + std::string(s) + "'");
}

/// Both players' losses from one set of scores, plus gradients of each loss
/// with respect to the real and fake scores.
template <class T>
struct AdversarialLoss {
    T d = 0;
    T g = 0;
    std::vector<T> d_wrt_real, d_wrt_fake;
    std::vector<T> g_wrt_real, g_wrt_fake;
};

struct LossWeights {
    double alpha = 1.0;  // weight on the discriminator's pretext loss
    double beta = 0.5;   // weight on the generator's pretext loss

    LossWeights() = default;
    LossWeights(double a, double b) : alpha(a), beta(b) {
        detail::require(alpha >= 0 && beta >= 0, "LossWeights: weights must be non-negative");
    }
};

namespace detail {

template <class T>
T softplus(T x) {
    return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <class T>
T sigmoid(T x) {
    if (x >= 0) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <class T>
T mean(std::span<const T> v) {
    T s = 0;
    for (T x : v) s += x;
    return s / static_cast<T>(v.size());
}

}  // namespace detail

template <class T>
AdversarialLoss<T> adversarial_loss(AdversarialKind kind, std::span<const T> real, std::span<const T> fake) {
    detail::require(!real.empty() && !fake.empty(), "adversarial_loss: empty score batch");
    const std::size_t nr = real.size(), nf = fake.size();
    const T inv_r = T(1) / static_cast<T>(nr), inv_f = T(1) / static_cast<T>(nf);
    AdversarialLoss<T> out;
    out.d_wrt_real.assign(nr, 0);
    out.d_wrt_fake.assign(nf, 0);
    out.g_wrt_real.assign(nr, 0);
    out.g_wrt_fake.assign(nf, 0);

    switch (kind) {
        case AdversarialKind::standard:
            // -log sigmoid(x) = softplus(-x), -log(1 - sigmoid(x)) = softplus(x)
            for (std::size_t i = 0; i < nr; ++i) {
                out.d += detail::softplus(-real[i]) * inv_r;
                out.d_wrt_real[i] = -detail::sigmoid(-real[i]) * inv_r;
            }
            for (std::size_t j = 0; j < nf; ++j) {
                out.d += detail::softplus(fake[j]) * inv_f;
                out.d_wrt_fake[j] = detail::sigmoid(fake[j]) * inv_f;
                out.g += detail::softplus(-fake[j]) * inv_f;
                out.g_wrt_fake[j] = -detail::sigmoid(-fake[j]) * inv_f;
            }
            break;

        case AdversarialKind::lsq:
            for (std::size_t i = 0; i < nr; ++i) {
                const T a = real[i] - 1;
                out.d += T(0.5) * a * a * inv_r;
                out.d_wrt_real[i] = a * inv_r;
            }
            for (std::size_t j = 0; j < nf; ++j) {
                out.d += T(0.5) * fake[j] * fake[j] * inv_f;
                out.d_wrt_fake[j] = fake[j] * inv_f;
                const T b = fake[j] - 1;
                out.g += T(0.5) * b * b * inv_f;
                out.g_wrt_fake[j] = b * inv_f;
            }
            break;

        case AdversarialKind::hinge:
            for (std::size_t i = 0; i < nr; ++i) {
                const T m = T(1) - real[i];
                if (m > 0) {
                    out.d += m * inv_r;
                    out.d_wrt_real[i] = -inv_r;
                }
            }
            for (std::size_t j = 0; j < nf; ++j) {
                const T m = T(1) + fake[j];
                if (m > 0) {
                    out.d += m * inv_f;
                    out.d_wrt_fake[j] = inv_f;
                }
                out.g -= fake[j] * inv_f;
                out.g_wrt_fake[j] = -inv_f;
            }
            break;

        case AdversarialKind::ralsq: {
            const T mean_r = detail::mean(real), mean_f = detail::mean(fake);
            // Each player's loss is 0.5*E[(r - E f - cr)^2] + 0.5*E[(f - E r - cf)^2]
            // with (cr, cf) = (1, 0) for D and (-1, 1) for G.
            auto relativistic = [&](T cr, T cf, T& value, std::vector<T>& dr, std::vector<T>& df) {
                T sum_a = 0, sum_b = 0;
                for (std::size_t i = 0; i < nr; ++i) {
                    const T a = real[i] - mean_f - cr;
                    value += T(0.5) * a * a * inv_r;
                    dr[i] = a * inv_r;
                    sum_a += a;
                }
                for (std::size_t j = 0; j < nf; ++j) {
                    const T b = fake[j] - mean_r - cf;
                    value += T(0.5) * b * b * inv_f;
                    df[j] = b * inv_f;
                    sum_b += b;
                }
                // Cross terms through the opposing batch means.
                const T mb = sum_b * inv_f, ma = sum_a * inv_r;
                for (std::size_t i = 0; i < nr; ++i) dr[i] -= mb * inv_r;
                for (std::size_t j = 0; j < nf; ++j) df[j] -= ma * inv_f;
            };
            relativistic(T(1), T(0), out.d, out.d_wrt_real, out.d_wrt_fake);
            relativistic(T(-1), T(1), out.g, out.g_wrt_real, out.g_wrt_fake);
            break;
        }
    }
    return out;
}

template <class T>
struct CrossEntropy {
    T value = 0;
    Tensor<T> grad;  // same shape as logits
};

/// Mean softmax cross-entropy of N x K logits against integer targets.
template <class T>
CrossEntropy<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> targets) {
    const int n = logits.n();
    const int k = static_cast<int>(logits.sample_size());
    detail::require(n > 0, "cross_entropy: empty batch");
    detail::require(static_cast<int>(targets.size()) == n, "cross_entropy: one target per row required");
    CrossEntropy<T> out{0, Tensor<T>(logits.n(), logits.c(), logits.h(), logits.w())};
    const T inv_n = T(1) / static_cast<T>(n);
    for (int i = 0; i < n; ++i) {
        detail::require(targets[i] >= 0 && targets[i] < k, "cross_entropy: target out of range");
        const T* row = logits.data() + static_cast<std::size_t>(i) * k;
        T* g = out.grad.data() + static_cast<std::size_t>(i) * k;
        int arg = 0;
        for (int j = 1; j < k; ++j)
            if (row[j] > row[arg]) arg = j;
        const T mx = row[arg];
        // loss = (mx - row[t]) + log1p(sum of the other terms), kept in that
        // order so a dominant correct logit does not round the loss to zero
        T rest = 0;
        for (int j = 0; j < k; ++j)
            if (j != arg) rest += std::exp(row[j] - mx);
        const T z = T(1) + rest;
        out.value += ((mx - row[targets[i]]) + std::log1p(rest)) * inv_n;
        for (int j = 0; j < k; ++j) g[j] = std::exp(row[j] - mx) / z * inv_n;
        g[targets[i]] -= inv_n;
    }
    return out;
}

/// Discriminator pretext loss: logits must come from shuffled real images.
template <class T>
CrossEntropy<T> deshuffle_loss_d(const Tensor<T>& logits_real, std::span<const int> targets_real) {
    return softmax_cross_entropy(logits_real, targets_real);
}

/// Generator pretext loss on shuffled fakes; same functional form as the D side.
template <class T>
CrossEntropy<T> deshuffle_loss_g(const Tensor<T>& logits_fake, std::span<const int> targets_fake) {
    return softmax_cross_entropy(logits_fake, targets_fake);
}

struct TotalLosses {
    double d;
    double g;
};

inline TotalLosses total_losses(double l_d, double l_g, double v_d, double v_g, const LossWeights& w) {
    return {l_d + w.alpha * v_d, l_g + w.beta * v_g};
}

}  // namespace dsgan
