#pragma once

// Evaluation protocols: Frechet distance on embedded features, deshuffling
// accuracy, and a linear probe on frozen discriminator features.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dsgan/error.hpp"
#include "dsgan/nets.hpp"
#include "dsgan/nn.hpp"
#include "dsgan/permute.hpp"
#include "dsgan/shuffler.hpp"
#include "dsgan/tensor.hpp"

namespace dsgan {

using MatXd = Eigen::MatrixXd;
using VecXd = Eigen::VectorXd;

struct FeatureSet {
    MatXd features;  // N x d
    std::vector<int> labels;
    std::string source;
    std::string embedder_version;

    int size() const noexcept { return static_cast<int>(features.rows()); }
    int dim() const noexcept { return static_cast<int>(features.cols()); }
};

struct GaussianStats {
    VecXd mu;
    MatXd sigma;
    int count = 0;
    std::string embedder_version;
};

inline GaussianStats gaussian_stats(const FeatureSet& f) {
    detail::require(f.size() >= 2, "gaussian_stats: need at least 2 samples");
    detail::require(f.features.allFinite(), "gaussian_stats: non-finite features");
    GaussianStats s;
    s.count = f.size();
    s.embedder_version = f.embedder_version;
    s.mu = f.features.colwise().mean().transpose();
    const MatXd centered = f.features.rowwise() - s.mu.transpose();
    s.sigma = (centered.transpose() * centered) / static_cast<double>(s.count - 1);
    s.sigma = (0.5 * (s.sigma + s.sigma.transpose())).eval();
    return s;
}

namespace detail {

/// Square root of a symmetric PSD matrix; eigenvalues below `floor` are clamped to 0.
inline MatXd sqrtm_psd(const MatXd& a, double floor = 1e-10) {
    const MatXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<MatXd> es(sym);
    VecXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = ev[i] < floor ? 0.0 : std::sqrt(ev[i]);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2).
inline double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
    detail::require(a.mu.size() == b.mu.size() && a.sigma.rows() == b.sigma.rows(), "frechet_distance: dimension mismatch");
    detail::require(a.embedder_version == b.embedder_version,
                    "frechet_distance: embedder versions differ ('" + a.embedder_version + "' vs '" + b.embedder_version + "')");
    const MatXd ra = detail::sqrtm_psd(a.sigma);
    const MatXd m = ra * b.sigma * ra;
    const double cross = detail::sqrtm_psd(m).trace();
    const double d = (a.mu - b.mu).squaredNorm() + a.sigma.trace() + b.sigma.trace() - 2.0 * cross;
    return std::max(d, 0.0);
}

/// Frozen, seed-determined convolutional encoder used as the FID feature map:
/// conv3x3(C->16) relu avgpool2, conv3x3(16->32) relu avgpool2, conv3x3(32->32)
/// relu, adaptive average pool to 2x2, giving 128 features.
class Embedder {
public:
    static constexpr std::uint64_t kDefaultSeed = 20240901;

    explicit Embedder(int channels = 3, std::uint64_t seed = kDefaultSeed) : channels_(channels), seed_(seed) {
        detail::require(channels == 1 || channels == 3, "Embedder: channels must be 1 or 3");
        Rng rng(seed);
        const int widths[] = {channels, 16, 32, 32};
        for (int i = 0; i < 3; ++i) {
            convs_.emplace_back("embed" + std::to_string(i), widths[i], widths[i + 1], 3, 1, 1);
            normal_init(convs_.back().weight.param, rng, std::sqrt(2.0 / (widths[i] * 9)));
        }
        version_ = "randconv-v1-c" + std::to_string(channels) + "-s" + std::to_string(seed);
    }

    const std::string& version() const noexcept { return version_; }
    int dim() const noexcept { return 128; }

    FeatureSet embed(const Tensor<float>& x, std::string source = {}) {
        detail::require(x.c() == channels_, "Embedder: channel mismatch");
        detail::require(x.h() >= 8 && x.h() == x.w(), "Embedder: images must be square and at least 8x8");
        FeatureSet out;
        out.features.resize(x.n(), dim());
        out.source = std::move(source);
        out.embedder_version = version_;
        constexpr int chunk = 128;
        for (int start = 0; start < x.n(); start += chunk) {
            const int end = std::min(x.n(), start + chunk);
            Tensor<float> h = x.slice(start, end);
            for (int i = 0; i < 3; ++i) {
                h = convs_[i].forward(h, false);
                for (auto& v : h.storage()) v = std::max(v, 0.0f);
                if (i < 2) h = avg_pool2(h);
            }
            for (int s = 0; s < h.n(); ++s)
                for (int c = 0; c < h.c(); ++c)
                    for (int qy = 0; qy < 2; ++qy)
                        for (int qx = 0; qx < 2; ++qx) {
                            const int y0 = qy * h.h() / 2, y1 = (qy + 1) * h.h() / 2;
                            const int x0 = qx * h.w() / 2, x1 = (qx + 1) * h.w() / 2;
                            double acc = 0;
                            for (int yy = y0; yy < y1; ++yy)
                                for (int xx = x0; xx < x1; ++xx) acc += h(s, c, yy, xx);
                            out.features(start + s, c * 4 + qy * 2 + qx) = acc / ((y1 - y0) * (x1 - x0));
                        }
        }
        return out;
    }

private:
    static Tensor<float> avg_pool2(const Tensor<float>& x) {
        Tensor<float> y(x.n(), x.c(), x.h() / 2, x.w() / 2);
        for (int s = 0; s < x.n(); ++s)
            for (int c = 0; c < x.c(); ++c)
                for (int i = 0; i < y.h(); ++i)
                    for (int j = 0; j < y.w(); ++j)
                        y(s, c, i, j) = 0.25f * (x(s, c, 2 * i, 2 * j) + x(s, c, 2 * i + 1, 2 * j) + x(s, c, 2 * i, 2 * j + 1) +
                                                 x(s, c, 2 * i + 1, 2 * j + 1));
        return y;
    }

    int channels_;
    std::uint64_t seed_;
    std::vector<Conv2d<float>> convs_;
    std::string version_;
};

inline FeatureSet embed_features(const Tensor<float>& x, Embedder& embedder, std::string source = {}) {
    return embedder.embed(x, std::move(source));
}

inline double fid(Embedder& embedder, const Tensor<float>& a, const Tensor<float>& b) {
    return frechet_distance(gaussian_stats(embedder.embed(a)), gaussian_stats(embedder.embed(b)));
}

struct AccuracyEstimate {
    double accuracy = 0;
    int correct = 0;
    int total = 0;

    /// Half-width of the normal-approximation 95% binomial interval.
    double ci95() const {
        if (total == 0) return 0;
        return 1.96 * std::sqrt(accuracy * (1 - accuracy) / total);
    }
};

using PermutationPredictor = std::function<std::vector<int>(const ShuffledBatch<float>&)>;

/// Shuffles `x` with labels drawn from `rng`, asks `predict` for labels and
/// returns the exact-match rate.
inline AccuracyEstimate deshuffle_accuracy(const PermutationPredictor& predict, const Tensor<float>& x,
                                           const PermutationSet& set, Rng& rng, int chunk = 256) {
    AccuracyEstimate est;
    for (int start = 0; start < x.n(); start += chunk) {
        const auto batch = shuffle_batch(x.slice(start, std::min(x.n(), start + chunk)), set, rng);
        const auto pred = predict(batch);
        detail::require(pred.size() == batch.labels.size(), "deshuffle_accuracy: predictor returned wrong count");
        for (std::size_t i = 0; i < pred.size(); ++i) est.correct += pred[i] == batch.labels[i];
        est.total += static_cast<int>(pred.size());
    }
    est.accuracy = est.total ? static_cast<double>(est.correct) / est.total : 0.0;
    return est;
}

inline std::vector<int> argmax_rows(const Tensor<float>& logits) {
    std::vector<int> out(logits.n());
    const int k = static_cast<int>(logits.sample_size());
    for (int i = 0; i < logits.n(); ++i) {
        const float* row = logits.data() + static_cast<std::size_t>(i) * k;
        out[i] = static_cast<int>(std::max_element(row, row + k) - row);
    }
    return out;
}

inline AccuracyEstimate deshuffle_accuracy(Discriminator<float>& d, const Tensor<float>& x, const PermutationSet& set, Rng& rng) {
    detail::require(d.pretext_classes() == set.size(), "deshuffle_accuracy: D2 head size does not match the permutation set");
    return deshuffle_accuracy(
        [&](const ShuffledBatch<float>& b) { return argmax_rows(d.pretext_head(d.trunk(b.data, false), false)); }, x, set, rng);
}

/// Globally pooled final-trunk-block features of `d` for the probe.
inline FeatureSet trunk_features(Discriminator<float>& d, const Tensor<float>& x, std::vector<int> labels, std::string source = {}) {
    FeatureSet out;
    out.labels = std::move(labels);
    out.source = std::move(source);
    constexpr int chunk = 256;
    for (int start = 0; start < x.n(); start += chunk) {
        const Tensor<float> f = d.pooled_features(x.slice(start, std::min(x.n(), start + chunk)));
        if (out.features.size() == 0) out.features.resize(x.n(), static_cast<Eigen::Index>(f.sample_size()));
        for (int i = 0; i < f.n(); ++i)
            for (std::size_t j = 0; j < f.sample_size(); ++j) out.features(start + i, j) = f.data()[i * f.sample_size() + j];
    }
    return out;
}

struct ProbeConfig {
    int iterations = 500;
    double lr = 0.5;
    double l2 = 1e-4;
};

struct ProbeReport {
    double train_accuracy = 0;
    double test_accuracy = 0;
    int num_classes = 0;
};

/// Multinomial logistic regression on standardised features, full-batch
/// gradient descent from a zero initialisation for a fixed budget.
inline ProbeReport linear_probe(const FeatureSet& train, const FeatureSet& test, const ProbeConfig& cfg = {}) {
    detail::require(train.size() > 0 && static_cast<int>(train.labels.size()) == train.size(), "linear_probe: train set needs labels");
    detail::require(test.size() > 0 && static_cast<int>(test.labels.size()) == test.size(), "linear_probe: test set needs labels");
    detail::require(train.dim() == test.dim(), "linear_probe: feature dimension mismatch");
    for (int y : train.labels) detail::require(y >= 0, "linear_probe: negative label");
    for (int y : test.labels) detail::require(y >= 0, "linear_probe: negative label");
    const int classes = 1 + std::max(*std::max_element(train.labels.begin(), train.labels.end()),
                                     *std::max_element(test.labels.begin(), test.labels.end()));
    {
        std::vector<int> seen(train.labels);
        std::sort(seen.begin(), seen.end());
        detail::require(std::unique(seen.begin(), seen.end()) - seen.begin() >= 2, "linear_probe: training set has a single class");
    }

    const VecXd mean = train.features.colwise().mean().transpose();
    VecXd sd = ((train.features.rowwise() - mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
    for (Eigen::Index j = 0; j < sd.size(); ++j) sd[j] = sd[j] > 1e-12 ? sd[j] : 1.0;
    auto standardise = [&](const MatXd& f) -> MatXd {
        MatXd s = f.rowwise() - mean.transpose();
        return s.array().rowwise() / sd.transpose().array();
    };
    const MatXd xtr = standardise(train.features);
    const MatXd xte = standardise(test.features);
    const int n = train.size();
    MatXd onehot = MatXd::Zero(n, classes);
    for (int i = 0; i < n; ++i) onehot(i, train.labels[i]) = 1.0;

    MatXd w = MatXd::Zero(train.dim(), classes);
    VecXd b = VecXd::Zero(classes);
    auto softmax = [](MatXd z) {
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            z.row(i).array() -= z.row(i).maxCoeff();
            z.row(i) = z.row(i).array().exp().matrix();
            z.row(i) /= z.row(i).sum();
        }
        return z;
    };
    for (int it = 0; it < cfg.iterations; ++it) {
        MatXd z = xtr * w;
        z.rowwise() += b.transpose();
        const MatXd g = (softmax(std::move(z)) - onehot) / n;
        w -= cfg.lr * (xtr.transpose() * g + cfg.l2 * w);
        b -= cfg.lr * g.colwise().sum().transpose();
    }
    auto accuracy = [&](const MatXd& x, const std::vector<int>& y) {
        MatXd z = x * w;
        z.rowwise() += b.transpose();
        int correct = 0;
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            Eigen::Index arg;
            z.row(i).maxCoeff(&arg);
            correct += static_cast<int>(arg) == y[i];
        }
        return static_cast<double>(correct) / z.rows();
    };
    return {accuracy(xtr, train.labels), accuracy(xte, test.labels), classes};
}

}  // namespace dsgan
