#pragma once

// Minimal layer library with hand-written backward passes.
//
// Layers cache what their backward pass needs from the most recent forward
// call, so each forward must be followed by at most one backward before the
// next forward on the same layer. Weight matrices are stored row-major as
// (output rows x flattened input cols), which is also the 2-D view used by
// spectral normalisation and orthogonal initialisation.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dsgan/error.hpp"
#include "dsgan/tensor.hpp"

namespace dsgan {

template <class T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using RowMatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <class T>
struct Param {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<T> value;
    std::vector<T> grad;

    Param() = default;
    Param(std::string n, int r, int c) : name(std::move(n)), rows(r), cols(c), value(std::size_t(r) * c, T(0)), grad(value.size(), T(0)) {}

    std::size_t size() const noexcept { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }

    Eigen::Map<RowMatX<T>> matrix() { return {value.data(), rows, cols}; }
    Eigen::Map<const RowMatX<T>> matrix() const { return {value.data(), rows, cols}; }
    Eigen::Map<RowMatX<T>> grad_matrix() { return {grad.data(), rows, cols}; }
};

// ---------------------------------------------------------------------------
// Initialisation

/// Fills a rows x cols matrix with a (semi-)orthogonal matrix scaled by `gain`.
template <class T>
void orthogonal_init(Param<T>& p, Rng& rng, double gain = 1.0) {
    const int big = std::max(p.rows, p.cols), small = std::min(p.rows, p.cols);
    std::normal_distribution<double> normal(0.0, 1.0);
    MatX<double> a(big, small);
    for (int j = 0; j < small; ++j)
        for (int i = 0; i < big; ++i) a(i, j) = normal(rng);
    Eigen::HouseholderQR<MatX<double>> qr(a);
    MatX<double> q = qr.householderQ() * MatX<double>::Identity(big, small);
    const MatX<double> r = qr.matrixQR().topRows(small);
    for (int j = 0; j < small; ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    auto w = p.matrix();
    for (int i = 0; i < p.rows; ++i)
        for (int j = 0; j < p.cols; ++j)
            w(i, j) = static_cast<T>(gain * (p.rows >= p.cols ? q(i, j) : q(j, i)));
}

template <class T>
void normal_init(Param<T>& p, Rng& rng, double stddev) {
    std::normal_distribution<double> normal(0.0, stddev);
    for (auto& v : p.value) v = static_cast<T>(normal(rng));
}

// ---------------------------------------------------------------------------
// Spectral normalisation

template <class T>
struct SpectralState {
    std::vector<T> u;  // left singular vector estimate, unit norm
    std::vector<T> v;  // right singular vector estimate from the last step
    std::uint64_t iterations = 0;

    bool operator==(const SpectralState&) const = default;
};

template <class T>
SpectralState<T> make_spectral_state(int rows, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    SpectralState<T> s;
    s.u.resize(rows);
    double norm = 0;
    for (auto& x : s.u) {
        x = static_cast<T>(normal(rng));
        norm += double(x) * double(x);
    }
    norm = std::sqrt(norm);
    for (auto& x : s.u) x = static_cast<T>(x / norm);
    return s;
}

template <class T>
struct SpectralStep {
    std::vector<T> normalized;  // W / sigma, row-major like the input
    T sigma = 1;
    bool guarded = false;  // sigma fell below the epsilon guard; weight returned unchanged
    SpectralState<T> state;
};

inline constexpr double kSpectralEps = 1e-12;

/// One power-iteration step on the rows x cols matrix `w`, then W / sigma.
/// With `advance == false` the stored (u, v) are reused unchanged.
template <class T>
SpectralStep<T> spectral_normalize(std::span<const T> w, int rows, int cols, SpectralState<T> state,
                                   bool advance = true) {
    detail::require(w.size() == std::size_t(rows) * cols, "spectral_normalize: shape mismatch");
    detail::require(static_cast<int>(state.u.size()) == rows, "spectral_normalize: state does not match rows");
    Eigen::Map<const RowMatX<T>> W(w.data(), rows, cols);
    Eigen::Map<VecX<T>> u(state.u.data(), rows);
    if (advance || static_cast<int>(state.v.size()) != cols) {
        VecX<T> v = W.transpose() * u;
        const T vn = v.norm();
        if (vn > T(kSpectralEps)) {
            v /= vn;
            VecX<T> wu = W * v;
            const T un = wu.norm();
            if (un > T(kSpectralEps)) u = wu / un;
        }
        state.v.assign(v.data(), v.data() + cols);
        ++state.iterations;
    }
    Eigen::Map<const VecX<T>> v(state.v.data(), cols);
    const T sigma = u.dot(W * v);
    SpectralStep<T> out;
    out.normalized.assign(w.begin(), w.end());
    if (std::abs(sigma) > T(kSpectralEps)) {
        out.sigma = sigma;
        for (auto& x : out.normalized) x /= sigma;
    } else {
        out.guarded = true;
    }
    out.state = std::move(state);
    return out;
}

/// Gradient of L(W / sigma(W)) with respect to W, treating (u, v) as constants:
/// (G - <G, W_sn> u v^T) / sigma.
template <class T>
void spectral_backward(const SpectralStep<T>& step, std::span<const T> grad_normalized, int rows, int cols,
                       std::span<T> grad_w) {
    if (step.guarded) {
        for (std::size_t i = 0; i < grad_normalized.size(); ++i) grad_w[i] += grad_normalized[i];
        return;
    }
    T inner = 0;
    for (std::size_t i = 0; i < grad_normalized.size(); ++i) inner += grad_normalized[i] * step.normalized[i];
    const T inv_sigma = T(1) / step.sigma;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const std::size_t k = std::size_t(r) * cols + c;
            grad_w[k] += (grad_normalized[k] - inner * step.state.u[r] * step.state.v[c]) * inv_sigma;
        }
}

/// Wraps a weight Param with optional spectral normalisation.
template <class T>
class Weight {
public:
    Param<T> param;

    Weight() = default;
    Weight(std::string name, int rows, int cols) : param(std::move(name), rows, cols) {}

    void enable_spectral(Rng& rng) {
        spectral_ = true;
        state_ = make_spectral_state<T>(param.rows, rng);
    }
    bool spectral() const noexcept { return spectral_; }
    SpectralState<T>& state() noexcept { return state_; }
    const SpectralState<T>& state() const noexcept { return state_; }
    T sigma() const noexcept { return step_.sigma; }

    /// Weight used by the most recent forward pass.
    const std::vector<T>& last_effective() const noexcept { return spectral_ ? step_.normalized : param.value; }

    /// Effective weight for this forward pass (advances power iteration if asked).
    const std::vector<T>& effective(bool advance) {
        if (!spectral_) return param.value;
        step_ = spectral_normalize<T>(param.value, param.rows, param.cols, std::move(state_), advance);
        state_ = step_.state;
        return step_.normalized;
    }

    void accumulate_grad(std::span<const T> grad_effective) {
        if (!spectral_) {
            for (std::size_t i = 0; i < grad_effective.size(); ++i) param.grad[i] += grad_effective[i];
            return;
        }
        spectral_backward<T>(step_, grad_effective, param.rows, param.cols, param.grad);
    }

private:
    bool spectral_ = false;
    SpectralState<T> state_;
    SpectralStep<T> step_;
};

// ---------------------------------------------------------------------------
// im2col / col2im (batched). The patch matrix is column-major
// (N*Ho*Wo) x (C*k*k): one contiguous run of output positions per kernel tap.

struct ConvGeometry {
    int channels, h, w, k, stride, pad, out_h, out_w;
};

inline int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

namespace detail {

// Output positions o in [lo, hi) read input index o*stride - pad + tap inside [0, extent).
inline std::pair<int, int> valid_range(int extent, int out, int stride, int pad, int tap) {
    int lo = pad - tap > 0 ? (pad - tap + stride - 1) / stride : 0;
    int hi = (extent - 1 + pad - tap) >= 0 ? (extent - 1 + pad - tap) / stride + 1 : 0;
    hi = std::min(hi, out);
    return {std::min(lo, hi), hi};
}

}  // namespace detail

template <class T>
void im2col(const T* x, int n, const ConvGeometry& g, T* cols) {
    const std::size_t positions = std::size_t(n) * g.out_h * g.out_w;
    for (int c = 0; c < g.channels; ++c)
        for (int ky = 0; ky < g.k; ++ky) {
            const auto [ylo, yhi] = detail::valid_range(g.h, g.out_h, g.stride, g.pad, ky);
            for (int kx = 0; kx < g.k; ++kx) {
                const auto [xlo, xhi] = detail::valid_range(g.w, g.out_w, g.stride, g.pad, kx);
                T* dst = cols + std::size_t((c * g.k + ky) * g.k + kx) * positions;
                for (int b = 0; b < n; ++b) {
                    const T* plane = x + (std::size_t(b) * g.channels + c) * g.h * g.w;
                    for (int oy = 0; oy < g.out_h; ++oy, dst += g.out_w) {
                        if (oy < ylo || oy >= yhi) {
                            std::fill_n(dst, g.out_w, T(0));
                            continue;
                        }
                        const T* row = plane + (oy * g.stride - g.pad + ky) * g.w - g.pad + kx;
                        std::fill_n(dst, xlo, T(0));
                        for (int ox = xlo; ox < xhi; ++ox) dst[ox] = row[ox * g.stride];
                        std::fill(dst + xhi, dst + g.out_w, T(0));
                    }
                }
            }
        }
}

template <class T>
void col2im(const T* cols, int n, const ConvGeometry& g, T* x) {
    const std::size_t positions = std::size_t(n) * g.out_h * g.out_w;
    for (int c = 0; c < g.channels; ++c)
        for (int ky = 0; ky < g.k; ++ky) {
            const auto [ylo, yhi] = detail::valid_range(g.h, g.out_h, g.stride, g.pad, ky);
            for (int kx = 0; kx < g.k; ++kx) {
                const auto [xlo, xhi] = detail::valid_range(g.w, g.out_w, g.stride, g.pad, kx);
                const T* src = cols + std::size_t((c * g.k + ky) * g.k + kx) * positions;
                for (int b = 0; b < n; ++b) {
                    T* plane = x + (std::size_t(b) * g.channels + c) * g.h * g.w;
                    for (int oy = 0; oy < g.out_h; ++oy, src += g.out_w) {
                        if (oy < ylo || oy >= yhi) continue;
                        T* row = plane + (oy * g.stride - g.pad + ky) * g.w - g.pad + kx;
                        for (int ox = xlo; ox < xhi; ++ox) row[ox * g.stride] += src[ox];
                    }
                }
            }
        }
}

namespace detail {

// NCHW -> (N*H*W) x C column-major, i.e. each channel plane stays contiguous.
template <class T>
MatX<T> to_pixel_major(const Tensor<T>& x) {
    const int hw = x.h() * x.w();
    MatX<T> m(std::size_t(x.n()) * hw, x.c());
    for (int b = 0; b < x.n(); ++b)
        for (int c = 0; c < x.c(); ++c)
            std::copy_n(x.data() + (std::size_t(b) * x.c() + c) * hw, hw, m.data() + std::size_t(c) * m.rows() + std::size_t(b) * hw);
    return m;
}

template <class T>
void from_pixel_major(const MatX<T>& m, Tensor<T>& x) {
    const int hw = x.h() * x.w();
    for (int b = 0; b < x.n(); ++b)
        for (int c = 0; c < x.c(); ++c)
            std::copy_n(m.data() + std::size_t(c) * m.rows() + std::size_t(b) * hw, hw, x.data() + (std::size_t(b) * x.c() + c) * hw);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Layers

template <class T>
class Conv2d {
public:
    Weight<T> weight;
    Param<T> bias;

    Conv2d() = default;
    Conv2d(std::string name, int in_c, int out_c, int k, int stride, int pad)
        : weight(name + ".weight", out_c, in_c * k * k), bias(name + ".bias", 1, out_c),
          in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad) {}

    int out_channels() const noexcept { return out_c_; }

    Tensor<T> forward(const Tensor<T>& x, bool advance_spectral) {
        detail::require(x.c() == in_c_, "Conv2d: channel mismatch");
        geo_ = {in_c_, x.h(), x.w(), k_, stride_, pad_, conv_out(x.h(), k_, stride_, pad_), conv_out(x.w(), k_, stride_, pad_)};
        n_ = x.n();
        const int ckk = in_c_ * k_ * k_;
        const int p = n_ * geo_.out_h * geo_.out_w;
        cols_.resize(p, ckk);
        im2col(x.data(), n_, geo_, cols_.data());
        const auto& w = weight.effective(advance_spectral);
        Eigen::Map<const RowMatX<T>> W(w.data(), out_c_, ckk);
        MatX<T> out_t = cols_ * W.transpose();  // P x Cout
        out_t.rowwise() += Eigen::Map<const VecX<T>>(bias.value.data(), out_c_).transpose();
        Tensor<T> y(n_, out_c_, geo_.out_h, geo_.out_w);
        detail::from_pixel_major(out_t, y);
        return y;
    }

    /// Returns an empty tensor when `input_grad` is false.
    Tensor<T> backward(const Tensor<T>& grad_out, bool param_grads, bool input_grad = true) {
        const int ckk = in_c_ * k_ * k_;
        const MatX<T> g_t = detail::to_pixel_major(grad_out);  // P x Cout
        if (param_grads) {
            RowMatX<T> dw = g_t.transpose() * cols_;
            weight.accumulate_grad(std::span<const T>(dw.data(), dw.size()));
            const VecX<T> db = g_t.colwise().sum().transpose();
            for (int c = 0; c < out_c_; ++c) bias.grad[c] += db[c];
        }
        if (!input_grad) return {};
        const auto& w = weight.last_effective();
        Eigen::Map<const RowMatX<T>> W(w.data(), out_c_, ckk);
        const MatX<T> dcols = g_t * W;  // P x CKK
        Tensor<T> dx(n_, in_c_, geo_.h, geo_.w);
        col2im(dcols.data(), n_, geo_, dx.data());
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&weight.param);
        out.push_back(&bias);
    }
    void collect_spectral(std::vector<Weight<T>*>& out) {
        if (weight.spectral()) out.push_back(&weight);
    }

private:
    int in_c_ = 0, out_c_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
    ConvGeometry geo_{};
    int n_ = 0;
    MatX<T> cols_;
};

/// Transposed convolution; weight rows are input channels, cols are (out_c, ky, kx).
template <class T>
class ConvTranspose2d {
public:
    Param<T> weight;
    Param<T> bias;

    ConvTranspose2d() = default;
    ConvTranspose2d(std::string name, int in_c, int out_c, int k, int stride, int pad)
        : weight(name + ".weight", in_c, out_c * k * k), bias(name + ".bias", 1, out_c),
          in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad) {}

    Tensor<T> forward(const Tensor<T>& x) {
        detail::require(x.c() == in_c_, "ConvTranspose2d: channel mismatch");
        n_ = x.n();
        in_h_ = x.h();
        in_w_ = x.w();
        const int oh = (x.h() - 1) * stride_ - 2 * pad_ + k_, ow = (x.w() - 1) * stride_ - 2 * pad_ + k_;
        geo_ = {out_c_, oh, ow, k_, stride_, pad_, x.h(), x.w()};
        x_t_ = detail::to_pixel_major(x);  // P_in x Cin
        Eigen::Map<const RowMatX<T>> W(weight.value.data(), in_c_, out_c_ * k_ * k_);
        const MatX<T> cols = x_t_ * W;  // P_in x CoutKK
        Tensor<T> y(n_, out_c_, oh, ow);
        col2im(cols.data(), n_, geo_, y.data());
        const int hw = oh * ow;
        for (int b = 0; b < n_; ++b)
            for (int c = 0; c < out_c_; ++c) {
                T* plane = y.data() + (std::size_t(b) * out_c_ + c) * hw;
                for (int i = 0; i < hw; ++i) plane[i] += bias.value[c];
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& grad_out, bool param_grads) {
        const int ckk = out_c_ * k_ * k_;
        MatX<T> dcols(std::size_t(n_) * in_h_ * in_w_, ckk);
        im2col(grad_out.data(), n_, geo_, dcols.data());
        Eigen::Map<const RowMatX<T>> W(weight.value.data(), in_c_, ckk);
        if (param_grads) {
            weight.grad_matrix().noalias() += x_t_.transpose() * dcols;
            const int hw = grad_out.h() * grad_out.w();
            for (int b = 0; b < n_; ++b)
                for (int c = 0; c < out_c_; ++c) {
                    const T* plane = grad_out.data() + (std::size_t(b) * out_c_ + c) * hw;
                    T s = 0;
                    for (int i = 0; i < hw; ++i) s += plane[i];
                    bias.grad[c] += s;
                }
        }
        const MatX<T> dx_t = dcols * W.transpose();  // P_in x Cin
        Tensor<T> dx(n_, in_c_, in_h_, in_w_);
        detail::from_pixel_major(dx_t, dx);
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }

private:
    int in_c_ = 0, out_c_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
    int n_ = 0, in_h_ = 0, in_w_ = 0;
    ConvGeometry geo_{};
    MatX<T> x_t_;
};

/// y = x W^T + b over rows of an N x in matrix (any trailing shape is flattened).
template <class T>
class Linear {
public:
    Weight<T> weight;
    Param<T> bias;

    Linear() = default;
    Linear(std::string name, int in, int out) : weight(name + ".weight", out, in), bias(name + ".bias", 1, out), in_(in), out_(out) {}

    int in_features() const noexcept { return in_; }
    int out_features() const noexcept { return out_; }

    Tensor<T> forward(const Tensor<T>& x, bool advance_spectral) {
        detail::require(static_cast<int>(x.sample_size()) == in_, "Linear: feature size mismatch");
        x_ = x;
        const auto& w = weight.effective(advance_spectral);
        Eigen::Map<const RowMatX<T>> W(w.data(), out_, in_);
        Eigen::Map<const RowMatX<T>> X(x.data(), x.n(), in_);
        Tensor<T> y = Tensor<T>::matrix(x.n(), out_);
        Eigen::Map<RowMatX<T>> Y(y.data(), x.n(), out_);
        Y.noalias() = X * W.transpose();
        Y.rowwise() += Eigen::Map<const VecX<T>>(bias.value.data(), out_).transpose();
        return y;
    }

    Tensor<T> backward(const Tensor<T>& grad_out, bool param_grads) {
        const int n = x_.n();
        Eigen::Map<const RowMatX<T>> G(grad_out.data(), n, out_);
        Eigen::Map<const RowMatX<T>> X(x_.data(), n, in_);
        if (param_grads) {
            RowMatX<T> dw = G.transpose() * X;
            weight.accumulate_grad(std::span<const T>(dw.data(), dw.size()));
            const VecX<T> db = G.colwise().sum().transpose();
            for (int c = 0; c < out_; ++c) bias.grad[c] += db[c];
        }
        const auto& w = weight.last_effective();
        Eigen::Map<const RowMatX<T>> W(w.data(), out_, in_);
        Tensor<T> dx(x_.n(), x_.c(), x_.h(), x_.w());
        Eigen::Map<RowMatX<T>> DX(dx.data(), n, in_);
        DX.noalias() = G * W;
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&weight.param);
        out.push_back(&bias);
    }
    void collect_spectral(std::vector<Weight<T>*>& out) {
        if (weight.spectral()) out.push_back(&weight);
    }

private:
    int in_ = 0, out_ = 0;
    Tensor<T> x_;
};

template <class T>
class LeakyReLU {
public:
    explicit LeakyReLU(T slope = T(0.2)) : slope_(slope) {}

    Tensor<T> forward(const Tensor<T>& x) {
        x_ = x;
        Tensor<T> y = x;
        for (auto& v : y.storage())
            if (v < 0) v *= slope_;
        return y;
    }
    Tensor<T> backward(const Tensor<T>& g) const {
        Tensor<T> dx = g;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (x_.storage()[i] < 0) dx.storage()[i] *= slope_;
        return dx;
    }

private:
    T slope_;
    Tensor<T> x_;
};

template <class T>
class ReLU {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        y_ = x;
        for (auto& v : y_.storage()) v = std::max(v, T(0));
        return y_;
    }
    Tensor<T> backward(const Tensor<T>& g) const {
        Tensor<T> dx = g;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (y_.storage()[i] <= 0) dx.storage()[i] = 0;
        return dx;
    }

private:
    Tensor<T> y_;
};

template <class T>
class Tanh {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        y_ = x;
        for (auto& v : y_.storage()) v = std::tanh(v);
        return y_;
    }
    Tensor<T> backward(const Tensor<T>& g) const {
        Tensor<T> dx = g;
        for (std::size_t i = 0; i < dx.size(); ++i) dx.storage()[i] *= T(1) - y_.storage()[i] * y_.storage()[i];
        return dx;
    }

private:
    Tensor<T> y_;
};

/// Per-channel normalisation over (N, H, W) using the statistics of the
/// current batch only (no running averages, so there is no hidden state that
/// changes when the layer is merely evaluated).
template <class T>
class BatchNorm2d {
public:
    Param<T> gamma;
    Param<T> beta;

    BatchNorm2d() = default;
    BatchNorm2d(std::string name, int channels, T eps = T(1e-5))
        : gamma(name + ".gamma", 1, channels), beta(name + ".beta", 1, channels), channels_(channels), eps_(eps) {
        std::fill(gamma.value.begin(), gamma.value.end(), T(1));
    }

    Tensor<T> forward(const Tensor<T>& x) {
        detail::require(x.c() == channels_, "BatchNorm2d: channel mismatch");
        const int hw = x.h() * x.w();
        const T count = static_cast<T>(x.n()) * hw;
        xhat_ = Tensor<T>(x.n(), x.c(), x.h(), x.w());
        inv_std_.assign(channels_, T(0));
        Tensor<T> y(x.n(), x.c(), x.h(), x.w());
        for (int c = 0; c < channels_; ++c) {
            double mean = 0, var = 0;
            for (int b = 0; b < x.n(); ++b) {
                const T* p = x.data() + (std::size_t(b) * channels_ + c) * hw;
                for (int i = 0; i < hw; ++i) mean += p[i];
            }
            mean /= count;
            for (int b = 0; b < x.n(); ++b) {
                const T* p = x.data() + (std::size_t(b) * channels_ + c) * hw;
                for (int i = 0; i < hw; ++i) var += (p[i] - mean) * (p[i] - mean);
            }
            var /= count;
            const T inv = static_cast<T>(1.0 / std::sqrt(var + eps_));
            inv_std_[c] = inv;
            for (int b = 0; b < x.n(); ++b) {
                const std::size_t off = (std::size_t(b) * channels_ + c) * hw;
                for (int i = 0; i < hw; ++i) {
                    const T xh = (x.data()[off + i] - static_cast<T>(mean)) * inv;
                    xhat_.data()[off + i] = xh;
                    y.data()[off + i] = gamma.value[c] * xh + beta.value[c];
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& g, bool param_grads) {
        const int hw = g.h() * g.w();
        const T count = static_cast<T>(g.n()) * hw;
        Tensor<T> dx(g.n(), g.c(), g.h(), g.w());
        for (int c = 0; c < channels_; ++c) {
            T sum_g = 0, sum_gx = 0;
            for (int b = 0; b < g.n(); ++b) {
                const std::size_t off = (std::size_t(b) * channels_ + c) * hw;
                for (int i = 0; i < hw; ++i) {
                    sum_g += g.data()[off + i];
                    sum_gx += g.data()[off + i] * xhat_.data()[off + i];
                }
            }
            if (param_grads) {
                gamma.grad[c] += sum_gx;
                beta.grad[c] += sum_g;
            }
            const T scale = gamma.value[c] * inv_std_[c];
            for (int b = 0; b < g.n(); ++b) {
                const std::size_t off = (std::size_t(b) * channels_ + c) * hw;
                for (int i = 0; i < hw; ++i)
                    dx.data()[off + i] = scale * (g.data()[off + i] - sum_g / count - xhat_.data()[off + i] * sum_gx / count);
            }
        }
        return dx;
    }

    void collect(std::vector<Param<T>*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }

private:
    int channels_ = 0;
    T eps_ = T(1e-5);
    Tensor<T> xhat_;
    std::vector<T> inv_std_;
};

}  // namespace dsgan
