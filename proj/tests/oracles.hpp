#pragma once

// Brute-force reference implementations used only by the tests. They share
// no code with the library beyond the table types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "itequant/core_model.hpp"

namespace oracle {

using u128 = unsigned __int128;

inline u128 choose(std::int64_t n, std::int64_t k) {
    if (k < 0 || k > n) return 0;
    u128 r = 1;
    for (std::int64_t i = 1; i <= k; ++i) r = r * static_cast<u128>(n - k + i) / static_cast<u128>(i);
    return r;
}

/// Exact hypergeometric tail as a reduced fraction evaluated once.
inline double hyper_tail(std::int64_t pop, std::int64_t succ, std::int64_t draws, std::int64_t x) {
    u128 num = 0;
    for (std::int64_t t = std::max<std::int64_t>(x, 0); t <= std::min(succ, draws); ++t) {
        num += choose(succ, t) * choose(pop - succ, draws - t);
    }
    return static_cast<double>(num) / static_cast<double>(choose(pop, draws));
}

/// Rank of y[i] among y by counting, ties ordered by priority.
inline std::vector<std::size_t> ranks(const std::vector<double>& y, const std::vector<std::uint32_t>& prio) {
    std::vector<std::size_t> r(y.size(), 1);
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (y[j] < y[i] || (y[j] == y[i] && prio[j] < prio[i])) ++r[i];
        }
    }
    return r;
}

inline double score(bool wilcoxon, int s, std::size_t r) {
    if (wilcoxon) return static_cast<double>(r);
    if (r < static_cast<std::size_t>(s)) return 0.0;
    return static_cast<double>(choose(static_cast<std::int64_t>(r) - 1, s - 1));
}

inline double rank_stat(const std::vector<int>& z, const std::vector<double>& y,
                        const std::vector<std::uint32_t>& prio, bool wilcoxon, int s) {
    const auto r = ranks(y, prio);
    double t = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] == 1) t += score(wilcoxon, s, r[i]);
    }
    return t;
}

/// Minimum of the rank statistic over effect vectors in H_{k,c}: each
/// treated unit gets either c or a huge effect, at most n - k huge ones.
inline double worst_case_grid(const std::vector<int>& z, const std::vector<double>& y,
                              const std::vector<std::uint32_t>& prio, std::size_t k, double c,
                              bool wilcoxon, int s) {
    std::vector<std::size_t> treated;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] == 1) treated.push_back(i);
    }
    const std::size_t budget = z.size() - k;
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << treated.size()); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) > budget) continue;
        std::vector<double> y0 = y;
        for (std::size_t t = 0; t < treated.size(); ++t) {
            y0[treated[t]] = (mask >> t & 1u) ? y[treated[t]] - 1e12 : y[treated[t]] - c;
        }
        best = std::min(best, rank_stat(z, y0, prio, wilcoxon, s));
    }
    return best;
}

/// inf{c : accept(c)} by evaluating every interval of the grid in order.
inline double linear_scan(const std::vector<double>& grid, const std::function<bool(double)>& accept) {
    std::vector<double> probes;
    probes.push_back(grid.front() - std::max(1.0, std::abs(grid.front())));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        probes.push_back(i + 1 < grid.size() ? grid[i] + (grid[i + 1] - grid[i]) / 2.0
                                             : grid[i] + std::max(1.0, std::abs(grid[i])));
    }
    if (accept(probes[0])) return -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < probes.size(); ++i) {
        if (accept(probes[i])) return grid[i - 1];
    }
    return std::numeric_limits<double>::infinity();
}

/// Visits every size-k subset of {0..n-1} as a 0/1 vector.
inline void each_assignment(std::size_t n, std::size_t k, const std::function<void(const std::vector<int>&)>& f) {
    std::vector<int> z(n, 0);
    std::fill(z.end() - static_cast<std::ptrdiff_t>(k), z.end(), 1);
    do {
        f(z);
    } while (std::next_permutation(z.begin(), z.end()));
}

}  // namespace oracle
