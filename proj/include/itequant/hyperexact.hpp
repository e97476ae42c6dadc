#pragma once

// Exact inference for ITE quantiles when control potential outcomes are
// bounded above by a known limit (placebo arms with highly specific assays).
//
// Tables passed to the placebo_* functions must carry `lod`; every control
// outcome must lie at or below it, and all effect-scale quantities (ITE
// thresholds, lower limits) refer to Y - lod.

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "itequant/core_model.hpp"

namespace itequant {

/// Hypergeometric(N, n, N_1): successes among `draws` taken without
/// replacement from `population` items of which `successes` are marked.
struct HypergeomParams {
    std::int64_t population = 0;
    std::int64_t successes = 0;
    std::int64_t draws = 0;

    std::int64_t support_min() const;
    std::int64_t support_max() const;
};

void check_params(const HypergeomParams& p);

double hyper_pmf(const HypergeomParams& p, std::int64_t x);

/// G_H(x) = Pr(X >= x).
double hyper_tail(const HypergeomParams& p, std::int64_t x);

/// Q_H(theta): smallest q with Pr(X <= q) >= theta, theta in (0, 1).
std::int64_t hyper_quantile(const HypergeomParams& p, double theta);

/// Q_H(1 - alpha) stated through the upper tail: the smallest q with
/// G_H(q + 1) <= alpha. Equal to hyper_quantile(p, 1 - alpha) in exact
/// arithmetic; this form shares G_H with the p-value, so test inversion and
/// the closed-form limits agree bit for bit.
std::int64_t hyper_upper_quantile(const HypergeomParams& p, double alpha);

/// n(c): treated outcomes (on the Y - lod scale) strictly above c.
std::size_t exceedance_count(const OutcomeTable& table, double c);

/// G_H(n(c); N, N - k, N_1), valid for H_{k,c} when Y_i(0) <= lod.
double placebo_pvalue(const OutcomeTable& table, const QuantileHypothesis& h);

/// [y_(k(alpha)), inf) with k(alpha) = N_1 - Q_H(1 - alpha; N, N - k, N_1).
OneSidedInterval placebo_ci_quantile(const OutcomeTable& table, std::size_t k, double alpha);

/// n_{c,alpha}: the confidence set for N(c) is {n_{c,alpha}, ..., N}.
std::size_t placebo_ci_count(const OutcomeTable& table, double c, double alpha);

struct SimultaneousLevel {
    double per_test_alpha = 0.0;
    double union_probability = 0.0;  // Monte Carlo estimate at per_test_alpha
};

/// Largest per-test level whose Monte Carlo union probability
///   Pr(U_j { sum_i Z_i 1(i > k_j) > Q_H(1 - a; N, N - k_j, N_1) })
/// stays at or below `alpha_target`. Bisection to 1e-4 over a single shared
/// set of assignment draws.
SimultaneousLevel calibrate_simultaneous_level(std::size_t n, std::size_t n_treated,
                                               const std::vector<std::size_t>& ranks,
                                               double alpha_target, std::size_t mc_draws,
                                               std::uint64_t seed, unsigned workers = 0);

struct PlaceboSimultaneousResult {
    ITEProfileCI profile;
    SimultaneousLevel level;
};

PlaceboSimultaneousResult placebo_simultaneous(const OutcomeTable& table,
                                               const std::vector<std::size_t>& ranks,
                                               double alpha_target, std::size_t mc_draws,
                                               std::uint64_t seed, unsigned workers = 0);

/// Y -> Y - lod; the returned table has lod = 0.
OutcomeTable lod_shift(const OutcomeTable& table, double lod);
/// Inverse of lod_shift for a single value.
inline double lod_unshift(double value, double lod) { return value + lod; }

struct PlaceboInferenceResult {
    ITEProfileCI profile;
    std::map<double, std::size_t> count_limits;  // c -> n_{c,alpha}
    double alpha = 0.05;
};

/// Pointwise (or simultaneous, when mc_draws > 0) limits for `ranks` plus
/// N(c) lower limits at each threshold.
PlaceboInferenceResult placebo_inference(const OutcomeTable& table,
                                         const std::vector<std::size_t>& ranks,
                                         const std::vector<double>& thresholds, double alpha,
                                         bool simultaneous, std::size_t mc_draws,
                                         std::uint64_t seed);

}  // namespace itequant
