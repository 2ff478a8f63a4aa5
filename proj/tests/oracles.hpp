#pragma once

// Brute-force reference implementations written directly from the metric
// definitions. They share no code with the library.

#include "uta/evaluation/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace uta::oracle {

/// Mean quality of every subset of size m, averaged (the random-rejection
/// expectation), by explicit enumeration.
inline double random_subset_mean(const std::vector<double>& q, std::size_t m) {
    const std::size_t n = q.size();
    double sum = 0.0;
    std::size_t count = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != m) continue;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) s += q[i];
        }
        sum += s / static_cast<double>(m);
        ++count;
    }
    return sum / static_cast<double>(count);
}

/// Mean quality kept after rejecting the first k of each rejection order
/// consistent with `worse` (ties in any order), averaged over all such
/// orders. Enumerates permutations, so keep n small.
template <typename Worse>
std::vector<double> tie_averaged_curve(const std::vector<eval::ScoredItem>& items, Worse worse) {
    const std::size_t n = items.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::vector<double> sum(n, 0.0);
    std::size_t count = 0;
    do {
        bool consistent = true;
        for (std::size_t a = 0; a + 1 < n && consistent; ++a) {
            // perm[a] is rejected before perm[a+1]; it must not be strictly better.
            if (worse(perm[a + 1], perm[a])) consistent = false;
        }
        if (!consistent) continue;
        ++count;
        for (std::size_t k = 0; k < n; ++k) {
            double s = 0.0;
            for (std::size_t p = k; p < n; ++p) s += items[perm[p]].quality;
            sum[k] += s / static_cast<double>(n - k);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (auto& v : sum) v /= static_cast<double>(count);
    return sum;
}

inline std::optional<double> prr(const std::vector<eval::ScoredItem>& items) {
    const std::size_t n = items.size();
    if (n < 2) return std::nullopt;
    std::vector<double> q;
    for (const auto& it : items) q.push_back(it.quality);
    auto by_unc = [&](std::size_t a, std::size_t b) { return items[a].uncertainty > items[b].uncertainty; };
    auto by_q = [&](std::size_t a, std::size_t b) { return items[a].quality < items[b].quality; };
    const auto cu = tie_averaged_curve(items, by_unc);
    const auto co = tie_averaged_curve(items, by_q);
    double unc = 0, orc = 0, rnd = 0;
    for (std::size_t k = 0; k < n; ++k) {
        unc += cu[k];
        orc += co[k];
        rnd += random_subset_mean(q, n - k);
    }
    unc /= static_cast<double>(n);
    orc /= static_cast<double>(n);
    rnd /= static_cast<double>(n);
    if (std::abs(orc - rnd) <= 1e-12) return std::nullopt;
    return (unc - rnd) / (orc - rnd);
}

/// Harrell's C over all ordered pairs.
inline std::optional<double> c_index(const std::vector<eval::SurvivalRecord>& r) {
    double num = 0.0;
    long den = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (i == j || !(r[i].time < r[j].time) || !r[i].event) continue;
            ++den;
            if (r[i].score < r[j].score) num += 1.0;
            if (r[i].score == r[j].score) num += 0.5;
        }
    }
    if (den == 0) return std::nullopt;
    return num / static_cast<double>(den);
}

/// Binary entropy in bits.
inline double h2(double p) {
    return (p > 0 ? -p * std::log2(p) : 0.0) + (p < 1 ? -(1 - p) * std::log2(1 - p) : 0.0);
}

}  // namespace uta::oracle
