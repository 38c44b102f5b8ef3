#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dsgan/shuffler.hpp"

using namespace dsgan;

namespace {

Tensor<double> random_batch(int n, int c, int side, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1, 1);
    Tensor<double> x(n, c, side, side);
    for (auto& v : x.storage()) v = u(rng);
    return x;
}

// Expected output for an identity label: the n'xn' top-left crop placed with
// floor/ceil replication padding, built independently of the gather map.
Tensor<double> padded_crop(const Tensor<double>& x, int n_prime) {
    const int n = x.h();
    const int lo = (n - n_prime) / 2;
    Tensor<double> out(x.n(), x.c(), n, n);
    for (int i = 0; i < x.n(); ++i)
        for (int c = 0; c < x.c(); ++c)
            for (int y = 0; y < n; ++y)
                for (int xx = 0; xx < n; ++xx) {
                    int sy = y - lo, sx = xx - lo;
                    sy = sy < 0 ? 0 : (sy >= n_prime ? n_prime - 1 : sy);
                    sx = sx < 0 ? 0 : (sx >= n_prime ? n_prime - 1 : sx);
                    out(i, c, y, xx) = x(i, c, sy, sx);
                }
    return out;
}

PermutationSet set_for(int g) { return g == 2 ? all_permutations(4) : select_max_hamming_set(9, 30, 1); }

}  // namespace

TEST(GridGeometry, Examples) {
    EXPECT_EQ(grid_geometry(128, 3), (GridGeometry{128, 3, 126, 42}));
    EXPECT_EQ(grid_geometry(126, 3), (GridGeometry{126, 3, 126, 42}));
    EXPECT_EQ(grid_geometry(32, 3), (GridGeometry{32, 3, 30, 10}));
    EXPECT_EQ(grid_geometry(33, 2), (GridGeometry{33, 2, 32, 16}));
    EXPECT_THROW(grid_geometry(2, 3), std::invalid_argument);
    EXPECT_THROW(grid_geometry(8, 1), std::invalid_argument);
}

TEST(GridGeometry, InvariantsForAllSizes) {
    for (int g : {2, 3})
        for (int n = g; n <= 200; ++n) {
            const auto geo = grid_geometry(n, g);
            ASSERT_LE(geo.n_prime, n);
            ASSERT_EQ(geo.n_prime % g, 0);
            ASSERT_EQ(geo.tile * g, geo.n_prime);
            ASSERT_GT(geo.n_prime + g, n);
            ASSERT_EQ(geo.pad_lo() + geo.pad_hi(), n - geo.n_prime);
            ASSERT_EQ(geo.pad_lo(), (n - geo.n_prime) / 2);
        }
}

TEST(Shuffle, OneSidePaddingAt128) {
    const auto geo = grid_geometry(128, 3);
    EXPECT_EQ(geo.pad_lo(), 1);
    EXPECT_EQ(geo.pad_hi(), 1);
    std::mt19937_64 rng(1);
    const auto x = random_batch(2, 3, 128, rng);
    const auto s = shuffle_batch(x, set_for(3), std::vector<int>{4, 17});
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 128; ++k) {
            EXPECT_EQ(s.data(0, c, k, 0), s.data(0, c, k, 1));
            EXPECT_EQ(s.data(0, c, k, 127), s.data(0, c, k, 126));
            EXPECT_EQ(s.data(1, c, 0, k), s.data(1, c, 1, k));
            EXPECT_EQ(s.data(1, c, 127, k), s.data(1, c, 126, k));
        }
}

TEST(Shuffle, IdentityLabelGivesPaddedCrop) {
    std::mt19937_64 rng(2);
    for (int g : {2, 3}) {
        const auto set = set_for(g);
        int id_label = -1;
        for (int k = 0; k < set.size(); ++k)
            if (set[k].is_identity()) id_label = k;
        // The 3x3 set need not contain the identity; build a one-element set that does.
        const PermutationSet id_set({Permutation::identity(g * g)}, g * g, 0, g * g);
        for (int n : {8, 31, 32, 33, 64}) {
            const auto x = random_batch(3, 2, n, rng);
            const auto expect = padded_crop(x, grid_geometry(n, g).n_prime);
            EXPECT_EQ(shuffle_batch(x, id_set, std::vector<int>{0, 0, 0}).data, expect);
            if (id_label >= 0) EXPECT_EQ(shuffle_batch(x, set, std::vector<int>(3, id_label)).data, expect);
        }
    }
}

TEST(Shuffle, ConstantImageStaysConstant) {
    Tensor<double> x(4, 3, 32, 32);
    x.fill(0.375);
    std::mt19937_64 rng(3);
    const auto s = shuffle_batch(x, set_for(3), rng);
    for (double v : s.data.storage()) ASSERT_EQ(v, 0.375);
}

TEST(Shuffle, TilesMoveAccordingToMapping) {
    // Each tile of a 30x30 image painted with its index; position i must show tile perm[i].
    const auto set = set_for(3);
    Tensor<double> x(1, 1, 30, 30);
    for (int y = 0; y < 30; ++y)
        for (int xx = 0; xx < 30; ++xx) x(0, 0, y, xx) = (y / 10) * 3 + xx / 10;
    for (int label = 0; label < set.size(); ++label) {
        const auto s = shuffle_batch(x, set, std::vector<int>{label});
        for (int pos = 0; pos < 9; ++pos)
            ASSERT_EQ(s.data(0, 0, (pos / 3) * 10 + 5, (pos % 3) * 10 + 5), set[label][pos]);
    }
}

TEST(Shuffle, RoundTripIsBitExactOnTiledRegion) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> side(8, 48);
    for (int g : {2, 3}) {
        const auto set = set_for(g);
        for (int trial = 0; trial < 100; ++trial) {
            const int n = side(rng);
            const auto x = random_batch(5, 3, n, rng);
            const auto s = shuffle_batch(x, set, rng);
            const auto back = deshuffle_batch(s, set);
            const int np = grid_geometry(n, g).n_prime;
            for (int i = 0; i < 5; ++i)
                for (int c = 0; c < 3; ++c)
                    for (int y = 0; y < np; ++y)
                        for (int xx = 0; xx < np; ++xx) ASSERT_EQ(back(i, c, y, xx), x(i, c, y, xx));
        }
    }
}

TEST(Shuffle, PreservesRegionMultiset) {
    std::mt19937_64 rng(5);
    for (int g : {2, 3}) {
        const auto set = set_for(g);
        const int n = 35;
        const int np = grid_geometry(n, g).n_prime, lo = grid_geometry(n, g).pad_lo();
        const auto x = random_batch(4, 1, n, rng);
        const auto s = shuffle_batch(x, set, rng);
        for (int i = 0; i < 4; ++i) {
            std::vector<double> a, b;
            for (int y = 0; y < np; ++y)
                for (int xx = 0; xx < np; ++xx) {
                    a.push_back(x(i, 0, y, xx));
                    b.push_back(s.data(i, 0, y + lo, xx + lo));
                }
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            ASSERT_EQ(a, b);
        }
    }
}

TEST(Shuffle, OutputShapeMatchesInput) {
    std::mt19937_64 rng(6);
    for (int g : {2, 3}) {
        const auto set = set_for(g);
        for (int n = g; n <= 40; ++n) {
            const auto x = random_batch(2, 1, n, rng);
            const auto s = shuffle_batch(x, set, rng);
            ASSERT_TRUE(s.data.same_shape(x));
            ASSERT_EQ(s.labels.size(), 2u);
        }
    }
}

TEST(Shuffle, Errors) {
    Tensor<double> rect(1, 1, 8, 9);
    std::mt19937_64 rng(7);
    EXPECT_THROW(shuffle_batch(rect, set_for(3), rng), std::invalid_argument);
    Tensor<double> sq(1, 1, 9, 9);
    EXPECT_THROW(shuffle_batch(sq, set_for(3), std::vector<int>{30}), std::invalid_argument);
    auto s = shuffle_batch(sq, set_for(3), std::vector<int>{0});
    s.labels[0] = 31;
    EXPECT_THROW(deshuffle_batch(s, set_for(3)), std::invalid_argument);
}

TEST(Shuffle, LabelsAreUniform) {
    std::mt19937_64 rng(8);
    const auto set = set_for(3);
    Tensor<double> x(1000, 1, 9, 9);
    std::vector<int> counts(30, 0);
    const int draws = 30000;
    for (int b = 0; b < draws / 1000; ++b)
        for (int l : shuffle_batch(x, set, rng).labels) ++counts[l];
    // Pearson statistic with 29 degrees of freedom: mean 29, sd sqrt(58); 3 sd bound.
    const double p = 1.0 / 30, mean = draws * p;
    double chi2 = 0;
    for (int c : counts) chi2 += (c - mean) * (c - mean) / mean;
    EXPECT_LE(chi2, 29 + 3 * std::sqrt(58.0));
    // per-bin binomial bound, widened for 30 simultaneous comparisons
    const double sd = std::sqrt(draws * p * (1 - p));
    for (int c : counts) EXPECT_LE(std::abs(c - mean), 4 * sd);
}

TEST(Shuffle, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int g : {2, 3}) {
        const auto set = set_for(g);
        for (int n : {9, 11}) {
            auto x = random_batch(2, 2, n, rng);
            Tensor<double> w(2, 2, n, n);
            for (auto& v : w.storage()) v = u(rng);
            const std::vector<int> labels{1, static_cast<int>(set.size()) - 1};
            // f(x) = sum w * s(x)^2
            auto f = [&](const Tensor<double>& in) {
                const auto s = shuffle_batch(in, set, labels);
                double acc = 0;
                for (std::size_t i = 0; i < s.data.size(); ++i) acc += w.storage()[i] * s.data.storage()[i] * s.data.storage()[i];
                return acc;
            };
            const auto s = shuffle_batch(x, set, labels);
            Tensor<double> gout(2, 2, n, n);
            for (std::size_t i = 0; i < gout.size(); ++i) gout.storage()[i] = 2 * w.storage()[i] * s.data.storage()[i];
            const auto grad = rearrange_backward(s, gout);
            const double h = 1e-6;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double keep = x.storage()[i];
                x.storage()[i] = keep + h;
                const double fp = f(x);
                x.storage()[i] = keep - h;
                const double fm = f(x);
                x.storage()[i] = keep;
                const double fd = (fp - fm) / (2 * h);
                const double an = grad.storage()[i];
                ASSERT_LE(std::abs(fd - an), 1e-4 * std::max(1.0, std::abs(an))) << "index " << i;
            }
        }
    }
}

TEST(Rotate, LabelZeroIsIdentityAndFourTurnsCompose) {
    std::mt19937_64 rng(10);
    const auto x = random_batch(3, 2, 13, rng);
    EXPECT_EQ(rotate_batch(x, std::vector<int>{0, 0, 0}).data, x);
    Tensor<double> y = x;
    for (int k = 0; k < 4; ++k) y = rotate_batch(y, std::vector<int>{1, 1, 1}).data;
    EXPECT_EQ(y, x);
    // 90 + 270 degrees, and two half turns
    EXPECT_EQ(rotate_batch(rotate_batch(x, std::vector<int>{1, 3, 2}).data, std::vector<int>{3, 1, 2}).data, x);
}

TEST(Rotate, QuarterTurnMatchesTransposeThenFlip) {
    const int n = 7;
    Tensor<double> x(1, 1, n, n);
    for (int y = 0; y < n; ++y)
        for (int xx = 0; xx < n; ++xx) x(0, 0, y, xx) = y * 100 + xx * xx;  // asymmetric
    // counter-clockwise quarter turn = transpose, then reverse the row order
    Tensor<double> t(1, 1, n, n), expect(1, 1, n, n);
    for (int y = 0; y < n; ++y)
        for (int xx = 0; xx < n; ++xx) t(0, 0, y, xx) = x(0, 0, xx, y);
    for (int y = 0; y < n; ++y)
        for (int xx = 0; xx < n; ++xx) expect(0, 0, y, xx) = t(0, 0, n - 1 - y, xx);
    const auto r = rotate_batch(x, std::vector<int>{1});
    EXPECT_EQ(r.data, expect);
    // top-right corner moves to top-left
    EXPECT_EQ(r.data(0, 0, 0, 0), x(0, 0, 0, n - 1));
}

TEST(Rotate, GradientIsInverseRotation) {
    std::mt19937_64 rng(11);
    const auto x = random_batch(4, 1, 6, rng);
    const auto r = rotate_batch(x, std::vector<int>{0, 1, 2, 3});
    const auto g = random_batch(4, 1, 6, rng);
    const auto back = rearrange_backward(r, g);
    EXPECT_EQ(back, rotate_batch(g, std::vector<int>{0, 3, 2, 1}).data);
}

TEST(Rotate, RejectsBadLabelsAndShapes) {
    Tensor<double> x(1, 1, 5, 5);
    EXPECT_THROW(rotate_batch(x, std::vector<int>{4}), std::invalid_argument);
    Tensor<double> rect(1, 1, 5, 6);
    EXPECT_THROW(rotate_batch(rect, std::vector<int>{1}), std::invalid_argument);
}
