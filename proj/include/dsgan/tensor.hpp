#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dsgan/error.hpp"

namespace dsgan {

using Rng = std::mt19937_64;

/// Dense NCHW tensor. Rank-2 data (N x F) is stored as N x F x 1 x 1.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    Tensor(int n, int c, int h, int w, T fill = T(0))
        : shape_{n, c, h, w}, data_(static_cast<std::size_t>(n) * c * h * w, fill) {
        detail::require(n >= 0 && c >= 0 && h >= 0 && w >= 0, "Tensor: negative extent");
    }

    static Tensor matrix(int rows, int cols, T fill = T(0)) { return Tensor(rows, cols, 1, 1, fill); }

    int n() const noexcept { return shape_[0]; }
    int c() const noexcept { return shape_[1]; }
    int h() const noexcept { return shape_[2]; }
    int w() const noexcept { return shape_[3]; }
    const std::array<int, 4>& shape() const noexcept { return shape_; }

    /// Elements per sample (C*H*W).
    std::size_t sample_size() const noexcept {
        return static_cast<std::size_t>(shape_[1]) * shape_[2] * shape_[3];
    }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    std::size_t index(int n, int c, int h, int w) const noexcept {
        return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }
    T& operator()(int n, int c, int h, int w) noexcept { return data_[index(n, c, h, w)]; }
    T operator()(int n, int c, int h, int w) const noexcept { return data_[index(n, c, h, w)]; }

    /// Row access for rank-2 use.
    T& at(int row, int col) noexcept { return data_[static_cast<std::size_t>(row) * shape_[1] + col]; }
    T at(int row, int col) const noexcept { return data_[static_cast<std::size_t>(row) * shape_[1] + col]; }

    std::span<T> sample(int i) noexcept { return {data_.data() + i * sample_size(), sample_size()}; }
    std::span<const T> sample(int i) const noexcept {
        return {data_.data() + i * sample_size(), sample_size()};
    }

    bool same_shape(const Tensor& o) const noexcept { return shape_ == o.shape_; }

    void reshape(int n, int c, int h, int w) {
        detail::require(static_cast<std::size_t>(n) * c * h * w == data_.size(), "Tensor::reshape: size mismatch");
        shape_ = {n, c, h, w};
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    /// Copies rows [begin, end) along the batch axis.
    Tensor slice(int begin, int end) const {
        detail::require(0 <= begin && begin <= end && end <= n(), "Tensor::slice: bad range");
        Tensor out(end - begin, c(), h(), w());
        std::copy(data_.begin() + begin * sample_size(), data_.begin() + end * sample_size(), out.data_.begin());
        return out;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(n(), c(), h(), w());
        std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
        return out;
    }

    bool operator==(const Tensor&) const = default;

private:
    std::array<int, 4> shape_{0, 0, 0, 0};
    std::vector<T> data_;
};

/// Stacks tensors along the batch axis; all must share C, H, W.
template <class T>
Tensor<T> concat_batch(std::initializer_list<const Tensor<T>*> parts) {
    int total = 0;
    const Tensor<T>* first = nullptr;
    for (auto* p : parts) {
        if (p->n() == 0) continue;
        if (!first) first = p;
        detail::require(p->c() == first->c() && p->h() == first->h() && p->w() == first->w(),
                        "concat_batch: inner shape mismatch");
        total += p->n();
    }
    if (!first) return {};
    Tensor<T> out(total, first->c(), first->h(), first->w());
    T* dst = out.data();
    for (auto* p : parts) dst = std::copy(p->storage().begin(), p->storage().end(), dst);
    return out;
}

inline std::string shape_string(const std::array<int, 4>& s) {
    return std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]) + "x" +
           std::to_string(s[3]);
}

}  // namespace dsgan
