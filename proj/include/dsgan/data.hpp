#pragma once

// In-memory labelled image datasets: procedurally rendered scenes and image
// folders, plus a seed-shuffled batch sampler.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dsgan/error.hpp"
#include "dsgan/tensor.hpp"

namespace dsgan {

template <class T>
struct Dataset {
    Tensor<T> images;         // N x C x n x n, values in [-1, 1]
    std::vector<int> labels;  // empty when unlabelled
    int num_classes = 0;

    int size() const noexcept { return images.n(); }
    bool labelled() const noexcept { return !labels.empty(); }

    Dataset subset(int begin, int end) const {
        Dataset out;
        out.images = images.slice(begin, end);
        if (labelled()) out.labels.assign(labels.begin() + begin, labels.begin() + end);
        out.num_classes = num_classes;
        return out;
    }

    template <class U>
    Dataset<U> cast() const {
        return {images.template cast<U>(), labels, num_classes};
    }
};

/// Epoch-wise shuffled index stream; a fresh permutation is drawn whenever the
/// current one is exhausted.
class BatchSampler {
public:
    BatchSampler() = default;
    BatchSampler(int dataset_size, std::uint64_t seed) : size_(dataset_size), rng_(seed) {
        detail::require(dataset_size > 0, "BatchSampler: empty dataset");
        reshuffle();
    }

    std::vector<int> next(int batch) {
        std::vector<int> out;
        out.reserve(batch);
        while (static_cast<int>(out.size()) < batch) {
            if (pos_ == order_.size()) reshuffle();
            out.push_back(order_[pos_++]);
        }
        return out;
    }

    std::uint64_t epoch() const noexcept { return epoch_; }

    // State access for checkpointing.
    const Rng& rng() const noexcept { return rng_; }
    const std::vector<int>& order() const noexcept { return order_; }
    std::size_t position() const noexcept { return pos_; }
    void restore(Rng rng, std::vector<int> order, std::size_t pos, std::uint64_t epoch) {
        rng_ = rng;
        order_ = std::move(order);
        pos_ = pos;
        epoch_ = epoch;
        size_ = static_cast<int>(order_.size());
    }

private:
    void reshuffle() {
        order_.resize(size_);
        std::iota(order_.begin(), order_.end(), 0);
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
        ++epoch_;
    }

    int size_ = 0;
    Rng rng_;
    std::vector<int> order_;
    std::size_t pos_ = 0;
    std::uint64_t epoch_ = 0;
};

template <class T>
Tensor<T> gather_images(const Tensor<T>& images, const std::vector<int>& idx) {
    Tensor<T> out(static_cast<int>(idx.size()), images.c(), images.h(), images.w());
    const std::size_t s = images.sample_size();
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(images.data() + idx[i] * s, s, out.data() + i * s);
    return out;
}

inline std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<int>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(labels[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Procedural scenes

enum class SceneStyle {
    outdoor,   // horizon, sky/ground gradients, freely placed objects (high structural diversity)
    portrait,  // one centred template with small jitter (constrained layout)
};

inline std::string_view to_string(SceneStyle s) { return s == SceneStyle::outdoor ? "outdoor" : "portrait"; }

inline SceneStyle parse_scene_style(std::string_view s) {
    if (s == "outdoor") return SceneStyle::outdoor;
    if (s == "portrait") return SceneStyle::portrait;
    throw std::invalid_argument("unknown scene style '" + std::string(s) + "'");
}

struct SyntheticSceneSpec {
    SceneStyle style = SceneStyle::outdoor;
    int num_classes = 4;
    int image_size = 32;
    int channels = 3;
    double noise = 0.04;
    std::uint64_t seed = 1;
};

namespace detail {

struct Rgb {
    double r, g, b;
};

inline Rgb mix(Rgb a, Rgb b, double t) { return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t}; }

class Canvas {
public:
    explicit Canvas(int n) : n_(n), px_(std::size_t(n) * n, Rgb{0, 0, 0}) {}
    int size() const noexcept { return n_; }
    Rgb& at(int y, int x) { return px_[std::size_t(y) * n_ + x]; }

    // Paints pixels whose centre satisfies `inside(u, v)` with u, v in [0,1).
    template <class Pred>
    void paint(Rgb colour, Pred inside, double alpha = 1.0) {
        for (int y = 0; y < n_; ++y)
            for (int x = 0; x < n_; ++x) {
                const double u = (x + 0.5) / n_, v = (y + 0.5) / n_;
                if (inside(u, v)) at(y, x) = mix(at(y, x), colour, alpha);
            }
    }

    void write(Tensor<float>& out, int index, int channels, double noise, Rng& rng) const {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int y = 0; y < n_; ++y)
            for (int x = 0; x < n_; ++x) {
                const Rgb p = px_[std::size_t(y) * n_ + x];
                if (channels == 1) {
                    const double l = 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
                    out(index, 0, y, x) = static_cast<float>(std::clamp(l + noise * normal(rng), -1.0, 1.0));
                } else {
                    const double c[3] = {p.r, p.g, p.b};
                    for (int k = 0; k < 3; ++k)
                        out(index, k, y, x) = static_cast<float>(std::clamp(c[k] + noise * normal(rng), -1.0, 1.0));
                }
            }
    }

private:
    int n_;
    std::vector<Rgb> px_;
};

inline Rgb random_colour(Rng& rng, double lo = -0.9, double hi = 0.9) {
    std::uniform_real_distribution<double> u(lo, hi);
    return {u(rng), u(rng), u(rng)};
}

// Shape predicates on a unit square centred at (cx, cy) with half-size s.
inline bool shape_contains(int shape, double u, double v, double cx, double cy, double s) {
    const double dx = (u - cx) / s, dy = (v - cy) / s;
    switch (shape % 4) {
        case 0: return dx * dx + dy * dy <= 1.0;                                     // disc
        case 1: return std::abs(dx) <= 0.8 && std::abs(dy) <= 1.0;                   // upright block
        case 2: return dy <= 1.0 && dy >= -1.0 && std::abs(dx) <= (dy + 1.0) * 0.5;  // triangle, apex up
        default: {                                                                    // ring
            const double r2 = dx * dx + dy * dy;
            return r2 <= 1.0 && r2 >= 0.36;
        }
    }
}

inline void render_outdoor(Canvas& cv, int label, int num_classes, Rng& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double horizon = 0.4 + 0.25 * u01(rng);
    const Rgb sky_top{-0.2 + 0.3 * u01(rng), 0.1 + 0.3 * u01(rng), 0.6 + 0.3 * u01(rng)};
    const Rgb sky_low{0.5 + 0.3 * u01(rng), 0.5 + 0.3 * u01(rng), 0.6 + 0.3 * u01(rng)};
    const Rgb ground_near{-0.7 + 0.3 * u01(rng), -0.5 + 0.4 * u01(rng), -0.8 + 0.2 * u01(rng)};
    const Rgb ground_far{-0.1 + 0.3 * u01(rng), 0.1 + 0.3 * u01(rng), -0.4 + 0.3 * u01(rng)};
    const double light = 0.15 + 0.2 * u01(rng);  // light comes from the right
    const int n = cv.size();
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double v = (y + 0.5) / n, uu = (x + 0.5) / n;
            Rgb c = v < horizon ? mix(sky_top, sky_low, v / horizon) : mix(ground_far, ground_near, (v - horizon) / (1.0 - horizon));
            const double shade = light * (uu - 0.5);
            cv.at(y, x) = {c.r + shade, c.g + shade, c.b + shade};
        }
    // Background clutter: a few small objects of random shape.
    const int clutter = 1 + static_cast<int>(u01(rng) * 3);
    for (int i = 0; i < clutter; ++i) {
        const int shape = static_cast<int>(u01(rng) * 4);
        const double s = 0.05 + 0.05 * u01(rng);
        const double cx = u01(rng), cy = horizon - s + 0.1 * u01(rng);
        cv.paint(random_colour(rng), [&](double a, double b) { return shape_contains(shape, a, b, cx, cy, s); });
    }
    // The labelled object rests on the ground plane.
    const double s = 0.14 + 0.1 * u01(rng);
    const double cx = 0.2 + 0.6 * u01(rng);
    const double cy = std::min(horizon + 0.05 + 0.25 * u01(rng), 1.0 - s) - 0.0;
    const Rgb body = random_colour(rng);
    const int shape = label % 4;
    cv.paint(body, [&](double a, double b) { return shape_contains(shape, a, b, cx, cy, s); });
    if (num_classes > 4) {
        // Classes beyond the four base shapes add a contrasting inner mark.
        const Rgb mark{-body.r, -body.g, -body.b};
        const int variant = label / 4;
        cv.paint(mark, [&](double a, double b) { return shape_contains(variant, a, b, cx, cy, s * 0.35); });
    }
}

inline void render_portrait(Canvas& cv, int label, Rng& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const Rgb bg = random_colour(rng, -0.8, 0.2);
    const int n = cv.size();
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) cv.at(y, x) = mix(bg, {bg.r + 0.3, bg.g + 0.3, bg.b + 0.3}, (y + 0.5) / n);
    const double jx = 0.03 * (u01(rng) - 0.5), jy = 0.03 * (u01(rng) - 0.5);
    const double cx = 0.5 + jx, cy = 0.55 + jy;
    const Rgb skin{0.4 + 0.4 * u01(rng), 0.1 + 0.3 * u01(rng), -0.1 + 0.3 * u01(rng)};
    const Rgb hair = random_colour(rng, -0.9, 0.5);
    // Hair silhouette differs per class.
    const int style = label % 4;
    cv.paint(hair, [&](double a, double b) {
        const double dx = (a - cx) / 0.36, dy = (b - (cy - 0.08)) / 0.42;
        switch (style) {
            case 0: return dx * dx + dy * dy <= 1.0 && b < cy;                  // short
            case 1: return dx * dx + dy * dy <= 1.0;                            // long
            case 2: return std::abs(a - cx) <= 0.34 && b < cy - 0.05;           // flat top
            default: return std::abs(a - cx) <= 0.12 && b < cy - 0.15 && b > 0.05;  // crest
        }
    });
    cv.paint(skin, [&](double a, double b) {
        const double dx = (a - cx) / 0.26, dy = (b - cy) / 0.32;
        return dx * dx + dy * dy <= 1.0;
    });
    const Rgb eye{-0.9, -0.9, -0.9};
    for (double side : {-1.0, 1.0})
        cv.paint(eye, [&](double a, double b) {
            const double dx = (a - (cx + side * 0.1)) / 0.05, dy = (b - (cy - 0.06)) / 0.035;
            return dx * dx + dy * dy <= 1.0;
        });
    const Rgb mouth{0.7, -0.4, -0.4};
    cv.paint(mouth, [&](double a, double b) { return std::abs(a - cx) <= 0.09 && std::abs(b - (cy + 0.15)) <= 0.025; });
}

}  // namespace detail

/// Renders `count` labelled scenes; labels are drawn uniformly from the classes.
inline Dataset<float> generate_synthetic_dataset(const SyntheticSceneSpec& spec, int count) {
    detail::require(spec.num_classes >= 1, "synthetic scenes: need at least one class");
    detail::require(spec.channels == 1 || spec.channels == 3, "synthetic scenes: channels must be 1 or 3");
    detail::require(spec.image_size >= 8, "synthetic scenes: image size must be >= 8");
    detail::require(count >= 0, "synthetic scenes: negative count");
    Rng rng(spec.seed);
    std::uniform_int_distribution<int> pick(0, spec.num_classes - 1);
    Dataset<float> ds;
    ds.images = Tensor<float>(count, spec.channels, spec.image_size, spec.image_size);
    ds.labels.resize(count);
    ds.num_classes = spec.num_classes;
    for (int i = 0; i < count; ++i) {
        const int label = pick(rng);
        ds.labels[i] = label;
        detail::Canvas cv(spec.image_size);
        if (spec.style == SceneStyle::outdoor)
            detail::render_outdoor(cv, label, spec.num_classes, rng);
        else
            detail::render_portrait(cv, label, rng);
        cv.write(ds.images, i, spec.channels, spec.noise, rng);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Resampling

/// Bilinear resize of one C x H x W image with half-pixel centres (edge clamped).
inline void resize_bilinear(const float* src, int channels, int h, int w, float* dst, int out_h, int out_w) {
    const double sy = static_cast<double>(h) / out_h, sx = static_cast<double>(w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;
            for (int c = 0; c < channels; ++c) {
                const float* p = src + std::size_t(c) * h * w;
                const double top = p[y0 * w + x0] * (1 - wx) + p[y0 * w + x1] * wx;
                const double bot = p[y1 * w + x0] * (1 - wx) + p[y1 * w + x1] * wx;
                dst[(std::size_t(c) * out_h + y) * out_w + x] = static_cast<float>(top * (1 - wy) + bot * wy);
            }
        }
    }
}

}  // namespace dsgan
