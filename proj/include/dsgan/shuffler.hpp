#pragma once

// Jigsaw shuffling of image batches and the rotation comparator.
//
// Both transforms are pure gathers: every output pixel copies exactly one input
// pixel. The gather map is kept alongside the output so gradients can be
// scattered back to the input (the generator needs this for its pretext loss).

#include <cstdint>
#include <random>
#include <vector>

#include "dsgan/permute.hpp"
#include "dsgan/tensor.hpp"

namespace dsgan {

struct GridGeometry {
    int n = 0;        // input side
    int g = 0;        // grid side
    int n_prime = 0;  // largest multiple of g not exceeding n
    int tile = 0;     // n_prime / g

    int pad_lo() const noexcept { return (n - n_prime) / 2; }
    int pad_hi() const noexcept { return n - n_prime - pad_lo(); }
    bool operator==(const GridGeometry&) const = default;
};

inline GridGeometry grid_geometry(int n, int g) {
    detail::require(g >= 2, "grid_geometry: grid side must be at least 2");
    detail::require(n >= g, "grid_geometry: image side smaller than grid side");
    const int n_prime = n - n % g;
    return {n, g, n_prime, n_prime / g};
}

/// Output of a gather-style rearrangement. `source[i*H*W + p]` is the input
/// pixel (within the same sample and channel) copied to output pixel p of sample i.
template <class T>
struct RearrangedBatch {
    Tensor<T> data;
    std::vector<int> labels;
    std::vector<std::int32_t> source;
};

template <class T>
using ShuffledBatch = RearrangedBatch<T>;

namespace detail {

inline void check_square(const auto& x, const char* who) {
    require(x.h() == x.w(), std::string(who) + ": input must be square");
    require(x.n() >= 0 && x.h() > 0, std::string(who) + ": empty spatial extent");
}

template <class T>
Tensor<T> gather(const Tensor<T>& x, const std::vector<std::int32_t>& source) {
    Tensor<T> out(x.n(), x.c(), x.h(), x.w());
    const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
    for (int i = 0; i < x.n(); ++i) {
        const std::int32_t* map = source.data() + i * plane;
        for (int c = 0; c < x.c(); ++c) {
            const T* src = x.data() + (static_cast<std::size_t>(i) * x.c() + c) * plane;
            T* dst = out.data() + (static_cast<std::size_t>(i) * x.c() + c) * plane;
            for (std::size_t p = 0; p < plane; ++p) dst[p] = src[map[p]];
        }
    }
    return out;
}

// Gather map for one sample shuffled by `perm`: the tiled top-left region is
// rearranged and placed at (pad_lo, pad_lo); the border replicates the nearest
// rearranged pixel.
inline void shuffle_map(const GridGeometry& geo, const Permutation& perm, std::int32_t* out) {
    const int lo = geo.pad_lo();
    for (int y = 0; y < geo.n; ++y) {
        const int ry = std::clamp(y - lo, 0, geo.n_prime - 1);
        for (int x = 0; x < geo.n; ++x) {
            const int rx = std::clamp(x - lo, 0, geo.n_prime - 1);
            const int pos = (ry / geo.tile) * geo.g + rx / geo.tile;
            const int src_tile = perm[pos];
            const int sy = (src_tile / geo.g) * geo.tile + ry % geo.tile;
            const int sx = (src_tile % geo.g) * geo.tile + rx % geo.tile;
            out[y * geo.n + x] = sy * geo.n + sx;
        }
    }
}

}  // namespace detail

/// Shuffles each sample with an explicitly given label.
template <class T>
ShuffledBatch<T> shuffle_batch(const Tensor<T>& x, const PermutationSet& set, std::vector<int> labels) {
    detail::check_square(x, "shuffle_batch");
    detail::require(static_cast<int>(labels.size()) == x.n(), "shuffle_batch: one label per sample required");
    const GridGeometry geo = grid_geometry(x.h(), set.grid());
    const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
    std::vector<std::int32_t> source(plane * x.n());
    for (int i = 0; i < x.n(); ++i) detail::shuffle_map(geo, set[labels[i]], source.data() + i * plane);
    Tensor<T> data = detail::gather(x, source);
    return {std::move(data), std::move(labels), std::move(source)};
}

/// Shuffles each sample with an independently drawn uniform label.
template <class T>
ShuffledBatch<T> shuffle_batch(const Tensor<T>& x, const PermutationSet& set, Rng& rng) {
    detail::check_square(x, "shuffle_batch");
    std::uniform_int_distribution<int> pick(0, set.size() - 1);
    std::vector<int> labels(x.n());
    for (auto& l : labels) l = pick(rng);
    return shuffle_batch(x, set, std::move(labels));
}

/// Undoes the per-sample shuffle. The tiled region is restored at the top-left
/// n'xn' corner; the remaining right/bottom strip replicates its edge.
template <class T>
Tensor<T> deshuffle_batch(const ShuffledBatch<T>& s, const PermutationSet& set) {
    detail::check_square(s.data, "deshuffle_batch");
    detail::require(static_cast<int>(s.labels.size()) == s.data.n(), "deshuffle_batch: label count mismatch");
    const GridGeometry geo = grid_geometry(s.data.h(), set.grid());
    const int lo = geo.pad_lo();
    const std::size_t plane = static_cast<std::size_t>(geo.n) * geo.n;
    std::vector<std::int32_t> source(plane * s.data.n());
    for (int i = 0; i < s.data.n(); ++i) {
        const Permutation inv = invert(set[s.labels[i]]);
        std::int32_t* map = source.data() + i * plane;
        for (int y = 0; y < geo.n; ++y) {
            const int ry = std::min(y, geo.n_prime - 1);
            for (int x = 0; x < geo.n; ++x) {
                const int rx = std::min(x, geo.n_prime - 1);
                const int orig_tile = (ry / geo.tile) * geo.g + rx / geo.tile;
                const int pos = inv[orig_tile];
                const int py = (pos / geo.g) * geo.tile + ry % geo.tile + lo;
                const int px = (pos % geo.g) * geo.tile + rx % geo.tile + lo;
                map[y * geo.n + x] = py * geo.n + px;
            }
        }
    }
    return detail::gather(s.data, source);
}

/// Rotates sample i counter-clockwise by labels[i] * 90 degrees.
template <class T>
RearrangedBatch<T> rotate_batch(const Tensor<T>& x, std::vector<int> labels) {
    detail::check_square(x, "rotate_batch");
    detail::require(static_cast<int>(labels.size()) == x.n(), "rotate_batch: one label per sample required");
    const int n = x.h();
    const std::size_t plane = static_cast<std::size_t>(n) * n;
    std::vector<std::int32_t> source(plane * x.n());
    for (int i = 0; i < x.n(); ++i) {
        detail::require(labels[i] >= 0 && labels[i] < 4, "rotate_batch: label must be in {0,1,2,3}");
        std::int32_t* map = source.data() + i * plane;
        for (int y = 0; y < n; ++y)
            for (int xx = 0; xx < n; ++xx) {
                int sy = y, sx = xx;
                for (int r = 0; r < labels[i]; ++r) {
                    // one CCW quarter turn: out(y, x) = in(x, n-1-y)
                    const int ty = sx, tx = n - 1 - sy;
                    sy = ty;
                    sx = tx;
                }
                map[y * n + xx] = sy * n + sx;
            }
    }
    Tensor<T> data = detail::gather(x, source);
    return {std::move(data), std::move(labels), std::move(source)};
}

template <class T>
RearrangedBatch<T> rotate_batch(const Tensor<T>& x, Rng& rng) {
    std::uniform_int_distribution<int> pick(0, 3);
    std::vector<int> labels(x.n());
    for (auto& l : labels) l = pick(rng);
    return rotate_batch(x, std::move(labels));
}

/// Scatters the gradient of a rearranged batch back onto its input.
template <class T>
Tensor<T> rearrange_backward(const RearrangedBatch<T>& r, const Tensor<T>& grad_out) {
    detail::require(grad_out.same_shape(r.data), "rearrange_backward: gradient shape mismatch");
    Tensor<T> grad_in(grad_out.n(), grad_out.c(), grad_out.h(), grad_out.w());
    const std::size_t plane = static_cast<std::size_t>(grad_out.h()) * grad_out.w();
    for (int i = 0; i < grad_out.n(); ++i) {
        const std::int32_t* map = r.source.data() + i * plane;
        for (int c = 0; c < grad_out.c(); ++c) {
            const std::size_t off = (static_cast<std::size_t>(i) * grad_out.c() + c) * plane;
            const T* g = grad_out.data() + off;
            T* dst = grad_in.data() + off;
            for (std::size_t p = 0; p < plane; ++p) dst[map[p]] += g[p];
        }
    }
    return grad_in;
}

}  // namespace dsgan
