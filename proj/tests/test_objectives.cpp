#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dsgan/objectives.hpp"

using namespace dsgan;

namespace {

using V = std::vector<double>;

AdversarialLoss<double> adv(AdversarialKind k, const V& r, const V& f) {
    return adversarial_loss<double>(k, std::span<const double>(r), std::span<const double>(f));
}

Tensor<double> logits_of(const std::vector<V>& rows) {
    Tensor<double> t = Tensor<double>::matrix(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) t.at(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    return t;
}

bool close_rel(double fd, double an) { return std::abs(fd - an) <= 1e-4 * std::max(std::abs(fd), std::abs(an)) + 1e-9; }

const AdversarialKind kKinds[] = {AdversarialKind::standard, AdversarialKind::lsq, AdversarialKind::hinge, AdversarialKind::ralsq};

}  // namespace

TEST(AdversarialLoss, HandComputedValues) {
    auto h = adv(AdversarialKind::hinge, {1, 1}, {-1, -1});
    EXPECT_NEAR(h.d, 0.0, 1e-6);
    auto l = adv(AdversarialKind::lsq, {1}, {0});
    EXPECT_NEAR(l.d, 0.0, 1e-6);
    EXPECT_NEAR(l.g, 0.5, 1e-6);
    for (double c : {-3.0, 0.0, 0.7, 12.5}) {
        auto r = adv(AdversarialKind::ralsq, {c, c, c}, {c, c});
        EXPECT_NEAR(r.d, 0.5, 1e-6);
        EXPECT_NEAR(r.g, 1.0, 1e-6);
    }
    auto s = adv(AdversarialKind::standard, {0, 0}, {0, 0, 0});
    EXPECT_NEAR(s.d, 2 * std::log(2.0), 1e-6);
    EXPECT_NEAR(s.d, 1.3863, 1e-4);
    EXPECT_NEAR(s.g, std::log(2.0), 1e-6);
}

TEST(AdversarialLoss, HingeGeneratorIsNegativeMeanFakeScore) {
    auto h = adv(AdversarialKind::hinge, {0.3}, {0.5, -1.5, 2.0});
    EXPECT_NEAR(h.g, -(0.5 - 1.5 + 2.0) / 3, 1e-12);
    EXPECT_NEAR(h.d, (1 - 0.3) + (1.5 + 0 + 3.0) / 3, 1e-12);
}

TEST(AdversarialLoss, StandardIsStableForLargeScores) {
    auto s = adv(AdversarialKind::standard, {1000, -1000}, {-1000, 1000});
    EXPECT_TRUE(std::isfinite(s.d));
    EXPECT_TRUE(std::isfinite(s.g));
    EXPECT_NEAR(s.d, 1000.0, 1e-6);  // 0.5*(0 + 1000) + 0.5*(0 + 1000)
    for (double g : s.d_wrt_real) EXPECT_TRUE(std::isfinite(g));
}

TEST(AdversarialLoss, EmptyBatchThrows) {
    EXPECT_THROW(adv(AdversarialKind::hinge, {}, {1}), std::invalid_argument);
    EXPECT_THROW(adv(AdversarialKind::lsq, {1}, {}), std::invalid_argument);
}

TEST(AdversarialLoss, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-3, 3);
    std::uniform_int_distribution<int> size(1, 6);
    const double h = 1e-5;
    for (auto kind : kKinds)
        for (int trial = 0; trial < 1000; ++trial) {
            V r(size(rng)), f(size(rng));
            for (auto& v : r) v = u(rng);
            for (auto& v : f) v = u(rng);
            const auto base = adv(kind, r, f);
            auto check = [&](V& vec, const std::vector<double>& gd, const std::vector<double>& gg) {
                for (std::size_t i = 0; i < vec.size(); ++i) {
                    const double keep = vec[i];
                    vec[i] = keep + h;
                    const auto p = adv(kind, r, f);
                    vec[i] = keep - h;
                    const auto m = adv(kind, r, f);
                    vec[i] = keep;
                    ASSERT_TRUE(close_rel((p.d - m.d) / (2 * h), gd[i])) << to_string(kind) << " d, trial " << trial;
                    ASSERT_TRUE(close_rel((p.g - m.g) / (2 * h), gg[i])) << to_string(kind) << " g, trial " << trial;
                }
            };
            check(r, base.d_wrt_real, base.g_wrt_real);
            check(f, base.d_wrt_fake, base.g_wrt_fake);
        }
}

TEST(AdversarialLoss, RelativisticShiftInvariance) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-2, 2), shift(-50, 50);
    for (int trial = 0; trial < 1000; ++trial) {
        V r(5), f(7);
        for (auto& v : r) v = u(rng);
        for (auto& v : f) v = u(rng);
        const double c = shift(rng);
        V rs = r, fs = f;
        for (auto& v : rs) v += c;
        for (auto& v : fs) v += c;
        const auto a = adv(AdversarialKind::ralsq, r, f), b = adv(AdversarialKind::ralsq, rs, fs);
        ASSERT_NEAR(a.d, b.d, 1e-10);
        ASSERT_NEAR(a.g, b.g, 1e-10);
    }
}

TEST(AdversarialLoss, HingeSaturation) {
    const auto h = adv(AdversarialKind::hinge, {1.5, 0.2, 3.0}, {-1.2, 0.0, -7.0});
    EXPECT_EQ(h.d_wrt_real[0], 0.0);
    EXPECT_EQ(h.d_wrt_real[2], 0.0);
    EXPECT_NE(h.d_wrt_real[1], 0.0);
    EXPECT_EQ(h.d_wrt_fake[0], 0.0);
    EXPECT_EQ(h.d_wrt_fake[2], 0.0);
    EXPECT_NE(h.d_wrt_fake[1], 0.0);
}

TEST(AdversarialLoss, LeastSquaresNonNegative) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int t = 0; t < 1000; ++t) {
        V r{u(rng), u(rng)}, f{u(rng)};
        const auto l = adv(AdversarialKind::lsq, r, f);
        const auto ra = adv(AdversarialKind::ralsq, r, f);
        ASSERT_GE(l.d, 0);
        ASSERT_GE(l.g, 0);
        ASSERT_GE(ra.d, 0);
        ASSERT_GE(ra.g, 0);
    }
}

TEST(AdversarialLoss, ParseRoundTrip) {
    for (auto k : kKinds) EXPECT_EQ(parse_adversarial_kind(to_string(k)), k);
    EXPECT_THROW(parse_adversarial_kind("wgan"), std::invalid_argument);
}

TEST(CrossEntropy, HandComputedValues) {
    const std::vector<int> t0{0};
    EXPECT_NEAR(deshuffle_loss_d<double>(logits_of({V(30, 0.0)}), t0).value, std::log(30.0), 1e-6);
    EXPECT_NEAR(std::log(30.0), 3.4012, 1e-4);
    V peaked(30, 0.0);
    peaked[0] = 10;
    const double expect = std::log1p(29 * std::exp(-10.0));
    EXPECT_NEAR(deshuffle_loss_d<double>(logits_of({peaked}), t0).value, expect, 1e-9);
    EXPECT_NEAR(expect, 1.316e-3, 1e-6);
    EXPECT_NEAR(deshuffle_loss_g<double>(logits_of({V(24, 1.5)}), t0).value, std::log(24.0), 1e-6);
    EXPECT_NEAR(std::log(24.0), 3.1781, 1e-4);
}

TEST(CrossEntropy, SameFormForBothPlayers) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0, 2);
    std::vector<V> rows(8, V(30));
    for (auto& r : rows)
        for (auto& v : r) v = n(rng);
    const std::vector<int> t{0, 3, 29, 7, 7, 1, 12, 5};
    const auto x = logits_of(rows);
    EXPECT_EQ(deshuffle_loss_d<double>(x, t).value, deshuffle_loss_g<double>(x, t).value);
}

TEST(CrossEntropy, ConfidentPredictionTendsToZeroMonotonically) {
    double prev = 1e9;
    for (double gap = 0; gap <= 60; gap += 2) {
        V row(30, 0.0);
        row[4] = gap;
        const double v = softmax_cross_entropy<double>(logits_of({row}), std::vector<int>{4}).value;
        EXPECT_LT(v, prev);
        EXPECT_GE(v, 0);
        prev = v;
    }
    EXPECT_LT(prev, 1e-20);
}

TEST(CrossEntropy, NormalisedByBatchSize) {
    const auto one = softmax_cross_entropy<double>(logits_of({V(5, 0.0)}), std::vector<int>{2}).value;
    const auto four = softmax_cross_entropy<double>(logits_of({V(5, 0.0), V(5, 0.0), V(5, 0.0), V(5, 0.0)}), std::vector<int>{0, 1, 2, 3}).value;
    EXPECT_NEAR(one, four, 1e-12);
}

TEST(CrossEntropy, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0, 3);
    std::uniform_int_distribution<int> rows(1, 4);
    const double h = 1e-5;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = rows(rng), k = trial % 2 ? 30 : 24;
        Tensor<double> x = Tensor<double>::matrix(n, k);
        for (auto& v : x.storage()) v = nd(rng);
        std::vector<int> t(n);
        std::uniform_int_distribution<int> pick(0, k - 1);
        for (auto& v : t) v = pick(rng);
        const auto base = softmax_cross_entropy<double>(x, t);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double keep = x.storage()[i];
            x.storage()[i] = keep + h;
            const double p = softmax_cross_entropy<double>(x, t).value;
            x.storage()[i] = keep - h;
            const double m = softmax_cross_entropy<double>(x, t).value;
            x.storage()[i] = keep;
            ASSERT_TRUE(close_rel((p - m) / (2 * h), base.grad.storage()[i])) << "trial " << trial << " fd " << (p - m) / (2 * h) << " an " << base.grad.storage()[i];
        }
    }
}

TEST(CrossEntropy, ShiftInvariancePerSample) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd(0, 2);
    std::uniform_real_distribution<double> shift(-100, 100);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor<double> x = Tensor<double>::matrix(3, 30);
        for (auto& v : x.storage()) v = nd(rng);
        const std::vector<int> t{1, 2, 3};
        Tensor<double> y = x;
        for (int i = 0; i < 3; ++i) {
            const double c = shift(rng);
            for (int j = 0; j < 30; ++j) y.at(i, j) += c;
        }
        ASSERT_NEAR(softmax_cross_entropy<double>(x, t).value, softmax_cross_entropy<double>(y, t).value, 1e-10);
    }
}

TEST(CrossEntropy, Errors) {
    EXPECT_THROW(softmax_cross_entropy<double>(logits_of({V(30, 0.0)}), std::vector<int>{30}), std::invalid_argument);
    EXPECT_THROW(softmax_cross_entropy<double>(logits_of({V(30, 0.0)}), std::vector<int>{-1}), std::invalid_argument);
    EXPECT_THROW(softmax_cross_entropy<double>(logits_of({V(30, 0.0)}), std::vector<int>{0, 1}), std::invalid_argument);
}

TEST(TotalLosses, CombinesWithWeights) {
    const LossWeights defaults;
    EXPECT_EQ(defaults.alpha, 1.0);
    EXPECT_EQ(defaults.beta, 0.5);
    EXPECT_EQ(total_losses(2, 1, 3, 4, LossWeights(1, 0.5)).d, 5.0);
    EXPECT_EQ(total_losses(2, 1, 3, 4, LossWeights(1, 0.5)).g, 3.0);
    EXPECT_EQ(total_losses(2, 1.25, 3, 4, LossWeights(1, 0)).g, 1.25);
    EXPECT_THROW(LossWeights(-1, 0.5), std::invalid_argument);
    EXPECT_THROW(LossWeights(1, -0.5), std::invalid_argument);
}
