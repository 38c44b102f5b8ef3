#pragma once

// Tile permutations and the pseudo-label sets built from them.
//
// A Permutation maps grid positions to source tiles: mapping[i] is the index of
// the original tile that ends up at position i after shuffling. The position of
// a permutation inside a PermutationSet is its class label.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dsgan/error.hpp"

namespace dsgan {

class Permutation {
public:
    Permutation() = default;

    explicit Permutation(std::vector<int> mapping) : mapping_(std::move(mapping)) {
        std::vector<char> seen(mapping_.size(), 0);
        for (int v : mapping_) {
            detail::require(v >= 0 && static_cast<std::size_t>(v) < mapping_.size() && !seen[v],
                            "Permutation: mapping is not a bijection");
            seen[v] = 1;
        }
    }

    static Permutation identity(int n) {
        std::vector<int> m(n);
        std::iota(m.begin(), m.end(), 0);
        return Permutation(std::move(m));
    }

    int size() const noexcept { return static_cast<int>(mapping_.size()); }
    int operator[](int i) const noexcept { return mapping_[i]; }
    const std::vector<int>& mapping() const noexcept { return mapping_; }

    bool is_identity() const noexcept {
        for (int i = 0; i < size(); ++i)
            if (mapping_[i] != i) return false;
        return true;
    }

    auto operator<=>(const Permutation&) const = default;

private:
    std::vector<int> mapping_;
};

/// Number of positions where p and q place different tiles.
inline int hamming_distance(const Permutation& p, const Permutation& q) {
    detail::require(p.size() == q.size(), "hamming_distance: length mismatch");
    int d = 0;
    for (int i = 0; i < p.size(); ++i) d += p[i] != q[i];
    return d;
}

/// (p ∘ q)[i] = p[q[i]]: apply q's rearrangement, then p's.
inline Permutation compose(const Permutation& p, const Permutation& q) {
    detail::require(p.size() == q.size(), "compose: length mismatch");
    std::vector<int> m(p.size());
    for (int i = 0; i < p.size(); ++i) m[i] = p[q[i]];
    return Permutation(std::move(m));
}

inline Permutation invert(const Permutation& p) {
    std::vector<int> m(p.size());
    for (int i = 0; i < p.size(); ++i) m[p[i]] = i;
    return Permutation(std::move(m));
}

class PermutationSet {
public:
    PermutationSet() = default;

    /// Validates bijection, common length, distinctness and the recorded
    /// separation. Throws std::invalid_argument on any violation.
    PermutationSet(std::vector<Permutation> perms, int n_tiles, std::uint64_t seed, int min_pairwise_hamming)
        : perms_(std::move(perms)), n_tiles_(n_tiles), seed_(seed), min_hamming_(min_pairwise_hamming) {
        detail::require(n_tiles_ == 4 || n_tiles_ == 9, "PermutationSet: n_tiles must be 4 or 9");
        detail::require(!perms_.empty(), "PermutationSet: empty");
        for (const auto& p : perms_)
            detail::require(p.size() == n_tiles_, "PermutationSet: permutation length differs from n_tiles");
        auto sorted = perms_;
        std::sort(sorted.begin(), sorted.end());
        detail::require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
                        "PermutationSet: duplicate permutation");
        detail::require(min_hamming_ == compute_min_hamming(perms_, n_tiles_),
                        "PermutationSet: recorded min_pairwise_hamming does not match the permutations");
    }

    int size() const noexcept { return static_cast<int>(perms_.size()); }
    int n_tiles() const noexcept { return n_tiles_; }
    int grid() const noexcept { return n_tiles_ == 4 ? 2 : 3; }
    std::uint64_t seed() const noexcept { return seed_; }
    int min_pairwise_hamming() const noexcept { return min_hamming_; }
    const std::vector<Permutation>& perms() const noexcept { return perms_; }

    const Permutation& operator[](int label) const {
        detail::require(label >= 0 && label < size(), "PermutationSet: label out of range");
        return perms_[label];
    }

    /// Minimum over all pairs; a single permutation has no pairs and reports n_tiles.
    static int compute_min_hamming(const std::vector<Permutation>& perms, int n_tiles) {
        int best = n_tiles;
        for (std::size_t i = 0; i < perms.size(); ++i)
            for (std::size_t j = i + 1; j < perms.size(); ++j)
                best = std::min(best, hamming_distance(perms[i], perms[j]));
        return best;
    }

    bool operator==(const PermutationSet&) const = default;

private:
    std::vector<Permutation> perms_;
    int n_tiles_ = 0;
    std::uint64_t seed_ = 0;
    int min_hamming_ = 0;
};

/// Every permutation of a 2x2 grid in lexicographic order.
inline PermutationSet all_permutations(int n_tiles = 4) {
    if (n_tiles != 4) throw UnsupportedError("all_permutations: only n_tiles = 4 is enumerated");
    std::vector<int> m{0, 1, 2, 3};
    std::vector<Permutation> perms;
    do {
        perms.emplace_back(m);
    } while (std::next_permutation(m.begin(), m.end()));
    const int mh = PermutationSet::compute_min_hamming(perms, n_tiles);
    return PermutationSet(std::move(perms), n_tiles, 0, mh);
}

namespace detail {

inline std::uint64_t factorial(int n) {
    std::uint64_t f = 1;
    for (int i = 2; i <= n; ++i) f *= static_cast<std::uint64_t>(i);
    return f;
}

}  // namespace detail

/// Greedy farthest-point selection over the full enumeration of n_tiles!
/// candidates. The first permutation is drawn uniformly from the seed; every
/// later pick maximises the minimum Hamming distance to those already chosen,
/// ties going to the lexicographically smallest mapping.
inline PermutationSet select_max_hamming_set(int n_tiles, int k, std::uint64_t seed) {
    if (n_tiles != 9 && n_tiles != 4) throw UnsupportedError("select_max_hamming_set: n_tiles must be 9 (or 4)");
    const std::uint64_t total = detail::factorial(n_tiles);
    detail::require(k >= 1 && static_cast<std::uint64_t>(k) <= total,
                    "select_max_hamming_set: K must be in [1, n_tiles!]");

    // Lexicographic enumeration, one byte per entry.
    std::vector<std::uint8_t> table(total * n_tiles);
    {
        std::vector<std::uint8_t> m(n_tiles);
        std::iota(m.begin(), m.end(), std::uint8_t{0});
        std::size_t row = 0;
        do {
            std::copy(m.begin(), m.end(), table.begin() + row * n_tiles);
            ++row;
        } while (std::next_permutation(m.begin(), m.end()));
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);
    std::uint64_t current = pick(rng);

    std::vector<std::uint8_t> min_dist(total, static_cast<std::uint8_t>(n_tiles + 1));
    std::vector<std::uint64_t> chosen{current};
    int achieved = n_tiles;
    while (static_cast<int>(chosen.size()) < k) {
        const std::uint8_t* c = &table[current * n_tiles];
        for (std::uint64_t r = 0; r < total; ++r) {
            const std::uint8_t* p = &table[r * n_tiles];
            std::uint8_t d = 0;
            for (int i = 0; i < n_tiles; ++i) d += p[i] != c[i];
            if (d < min_dist[r]) min_dist[r] = d;
        }
        // First maximum in enumeration order is the lexicographic tie-break.
        std::uint64_t best = 0;
        for (std::uint64_t r = 1; r < total; ++r)
            if (min_dist[r] > min_dist[best]) best = r;
        achieved = std::min<int>(achieved, min_dist[best]);
        current = best;
        chosen.push_back(current);
    }

    std::vector<Permutation> perms;
    perms.reserve(chosen.size());
    for (auto r : chosen)
        perms.emplace_back(std::vector<int>(table.begin() + r * n_tiles, table.begin() + (r + 1) * n_tiles));
    return PermutationSet(std::move(perms), n_tiles, seed, achieved);
}

/// The label set used for a g x g grid: all 24 permutations for 2x2, the greedy
/// Hamming set of size k for 3x3.
inline PermutationSet permutation_set_for_grid(int grid, int k, std::uint64_t seed) {
    if (grid == 2) {
        detail::require(k == 24, "2x2 grid uses all 24 permutations (num_perms must be 24)");
        return all_permutations(4);
    }
    detail::require(grid == 3, "grid must be 2 or 3");
    return select_max_hamming_set(9, k, seed);
}

// Text format: "n_tiles K seed min_hamming" then one permutation per line.
inline void write_permutation_set(std::ostream& os, const PermutationSet& set) {
    os << set.n_tiles() << ' ' << set.size() << ' ' << set.seed() << ' ' << set.min_pairwise_hamming() << '\n';
    for (const auto& p : set.perms()) {
        for (int i = 0; i < p.size(); ++i) os << (i ? " " : "") << p[i];
        os << '\n';
    }
}

inline PermutationSet read_permutation_set(std::istream& is) {
    int n_tiles = 0, k = 0, mh = 0;
    std::uint64_t seed = 0;
    std::string line;
    detail::require(static_cast<bool>(std::getline(is, line)), "permutation file: missing header");
    {
        std::istringstream hs(line);
        detail::require(static_cast<bool>(hs >> n_tiles >> k >> seed >> mh), "permutation file: malformed header");
    }
    detail::require(n_tiles == 4 || n_tiles == 9, "permutation file: n_tiles must be 4 or 9");
    detail::require(k >= 1, "permutation file: K must be positive");
    std::vector<Permutation> perms;
    while (static_cast<int>(perms.size()) < k && std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        std::vector<int> m;
        int v;
        while (ls >> v) m.push_back(v);
        detail::require(ls.eof(), "permutation file: non-integer token");
        detail::require(static_cast<int>(m.size()) == n_tiles, "permutation file: wrong permutation length");
        perms.emplace_back(std::move(m));
    }
    detail::require(static_cast<int>(perms.size()) == k, "permutation file: fewer permutations than header K");
    return PermutationSet(std::move(perms), n_tiles, seed, mh);
}

inline void save_permutation_set(const std::string& path, const PermutationSet& set) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    write_permutation_set(os, set);
}

inline PermutationSet load_permutation_set(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot read " + path);
    return read_permutation_set(is);
}

}  // namespace dsgan
