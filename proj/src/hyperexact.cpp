#include "itequant/hyperexact.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "itequant/error.hpp"
#include "itequant/parallel.hpp"
#include "itequant/random.hpp"

namespace itequant {

namespace {

constexpr std::int64_t kExactLimit = 60;

// Pascal's triangle up to 60; C(60, 30) ~ 1.2e17 fits in 64 bits.
const auto& pascal() {
    static const auto table = [] {
        std::array<std::array<std::uint64_t, kExactLimit + 1>, kExactLimit + 1> t{};
        for (std::size_t n = 0; n <= kExactLimit; ++n) {
            t[n][0] = 1;
            for (std::size_t k = 1; k <= n; ++k) t[n][k] = t[n - 1][k - 1] + (k <= n - 1 ? t[n - 1][k] : 0);
        }
        return t;
    }();
    return table;
}

double log_choose(std::int64_t n, std::int64_t k) {
    return std::lgamma(static_cast<double>(n + 1)) - std::lgamma(static_cast<double>(k + 1)) -
           std::lgamma(static_cast<double>(n - k + 1));
}

// Numerator C(n, x) C(N - n, N_1 - x) of the exact pmf; x must be in support.
std::uint64_t exact_term(const HypergeomParams& p, std::int64_t x) {
    const auto& c = pascal();
    return c[p.successes][x] * c[p.population - p.successes][p.draws - x];
}

double log_pmf(const HypergeomParams& p, std::int64_t x) {
    return log_choose(p.successes, x) + log_choose(p.population - p.successes, p.draws - x) -
           log_choose(p.population, p.draws);
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
}

std::vector<double> effect_scale_treated(const OutcomeTable& table) {
    validate_table(table, TableMode::placebo);
    const double lod = *table.lod();
    const auto& z = table.assignment();
    const auto& y = table.outcomes();
    std::vector<double> treated;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (z[i] == 1) {
            treated.push_back(y[i] - lod);
        } else if (y[i] > lod) {
            throw ValidationError("non-placebo table: control outcome at row " + std::to_string(i + 1) +
                                  " exceeds the Y(0) bound");
        }
    }
    std::sort(treated.begin(), treated.end());
    return treated;
}

HypergeomParams params_for_rank(const OutcomeTable& table, std::size_t k) {
    const auto n = static_cast<std::int64_t>(table.size());
    return {n, n - static_cast<std::int64_t>(k), static_cast<std::int64_t>(table.treated_count())};
}

void check_rank(const OutcomeTable& table, std::size_t k) {
    if (k < 1 || k > table.size()) {
        throw ValidationError("rank k=" + std::to_string(k) + " outside [1, " + std::to_string(table.size()) + "]");
    }
}

}  // namespace

std::int64_t HypergeomParams::support_min() const {
    return std::max<std::int64_t>(0, draws + successes - population);
}

std::int64_t HypergeomParams::support_max() const { return std::min(successes, draws); }

void check_params(const HypergeomParams& p) {
    if (p.population < 0 || p.successes < 0 || p.successes > p.population || p.draws < 0 ||
        p.draws > p.population) {
        throw ValidationError("invalid hypergeometric parameters (N=" + std::to_string(p.population) +
                              ", n=" + std::to_string(p.successes) + ", N1=" + std::to_string(p.draws) + ")");
    }
}

double hyper_pmf(const HypergeomParams& p, std::int64_t x) {
    check_params(p);
    if (x < p.support_min() || x > p.support_max()) return 0.0;
    if (p.population <= kExactLimit) {
        const auto den = pascal()[p.population][p.draws];
        return static_cast<double>(exact_term(p, x)) / static_cast<double>(den);
    }
    return std::exp(log_pmf(p, x));
}

double hyper_tail(const HypergeomParams& p, std::int64_t x) {
    check_params(p);
    const auto lo = p.support_min();
    const auto hi = p.support_max();
    if (x <= lo) return 1.0;
    if (x > hi) return 0.0;
    if (p.population <= kExactLimit) {
        std::uint64_t num = 0;
        for (auto t = hi; t >= x; --t) num += exact_term(p, t);
        return static_cast<double>(num) / static_cast<double>(pascal()[p.population][p.draws]);
    }
    double acc = 0.0;
    for (auto t = hi; t >= x; --t) acc += std::exp(log_pmf(p, t));
    return std::clamp(acc, 0.0, 1.0);
}

std::int64_t hyper_quantile(const HypergeomParams& p, double theta) {
    check_params(p);
    if (!(theta > 0.0 && theta < 1.0)) throw ValidationError("theta must lie in (0, 1)");
    const auto lo = p.support_min();
    const auto hi = p.support_max();
    if (p.population <= kExactLimit) {
        const double den = static_cast<double>(pascal()[p.population][p.draws]);
        std::uint64_t num = 0;
        for (auto q = lo; q <= hi; ++q) {
            num += exact_term(p, q);
            if (static_cast<double>(num) / den >= theta) return q;
        }
        return hi;
    }
    double acc = 0.0;
    for (auto q = lo; q <= hi; ++q) {
        acc += std::exp(log_pmf(p, q));
        if (acc >= theta) return q;
    }
    return hi;
}

std::int64_t hyper_upper_quantile(const HypergeomParams& p, double alpha) {
    check_params(p);
    check_alpha(alpha);
    for (auto q = p.support_min(); q < p.support_max(); ++q) {
        if (hyper_tail(p, q + 1) <= alpha) return q;
    }
    return p.support_max();
}

std::size_t exceedance_count(const OutcomeTable& table, double c) {
    const auto treated = effect_scale_treated(table);
    return static_cast<std::size_t>(treated.end() - std::upper_bound(treated.begin(), treated.end(), c));
}

double placebo_pvalue(const OutcomeTable& table, const QuantileHypothesis& h) {
    if (h.k < 1 || static_cast<std::size_t>(h.k) > table.size()) {
        throw ValidationError("rank k=" + std::to_string(h.k) + " outside [1, " + std::to_string(table.size()) + "]");
    }
    const auto n_c = static_cast<std::int64_t>(exceedance_count(table, h.c));
    return std::clamp(hyper_tail(params_for_rank(table, static_cast<std::size_t>(h.k)), n_c), 0.0, 1.0);
}

OneSidedInterval placebo_ci_quantile(const OutcomeTable& table, std::size_t k, double alpha) {
    check_alpha(alpha);
    check_rank(table, k);
    const auto treated = effect_scale_treated(table);
    const auto q = hyper_upper_quantile(params_for_rank(table, k), alpha);
    const auto k_alpha = static_cast<std::int64_t>(treated.size()) - q;
    OneSidedInterval ci;
    ci.level = 1.0 - alpha;
    ci.lower = k_alpha <= 0 ? kNegInf : treated[static_cast<std::size_t>(k_alpha - 1)];
    return ci;
}

std::size_t placebo_ci_count(const OutcomeTable& table, double c, double alpha) {
    check_alpha(alpha);
    const auto n_c = static_cast<std::int64_t>(exceedance_count(table, c));
    // G_H is nonincreasing in k, so scan down from k = N.
    for (std::size_t k = table.size(); k > 0; --k) {
        if (hyper_tail(params_for_rank(table, k), n_c) > alpha) return table.size() - k;
    }
    return table.size();  // k = 0 always qualifies
}

SimultaneousLevel calibrate_simultaneous_level(std::size_t n, std::size_t n_treated,
                                               const std::vector<std::size_t>& ranks,
                                               double alpha_target, std::size_t mc_draws,
                                               std::uint64_t seed, unsigned workers) {
    check_alpha(alpha_target);
    if (ranks.empty()) throw ValidationError("no ranks requested");
    if (!std::is_sorted(ranks.begin(), ranks.end())) throw ValidationError("ranks must be sorted");
    if (ranks.front() < 1 || ranks.back() > n) throw ValidationError("rank outside [1, N]");
    if (n_treated > n) throw ValidationError("more treated units than participants");
    if (mc_draws == 0) throw ValidationError("mc_draws must be positive");

    const std::size_t J = ranks.size();
    // counts[m * J + j] = treated units among positions > k_j in draw m.
    std::vector<std::uint32_t> counts(mc_draws * J);
    parallel_for(mc_draws, workers, [&](std::size_t m) {
        CounterRng rng(seed, m);
        std::vector<std::size_t> scratch(n);
        sample_subset(rng, scratch, n_treated);
        std::vector<std::size_t> picked(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(n_treated));
        std::sort(picked.begin(), picked.end());
        for (std::size_t j = 0; j < J; ++j) {
            // positions are 1-based: index i (0-based) has position i + 1 > k  <=>  i >= k
            const auto above = picked.end() - std::lower_bound(picked.begin(), picked.end(), ranks[j]);
            counts[m * J + j] = static_cast<std::uint32_t>(above);
        }
    });

    const auto union_probability = [&](double a) {
        std::vector<std::int64_t> q(J);
        for (std::size_t j = 0; j < J; ++j) {
            q[j] = hyper_upper_quantile({static_cast<std::int64_t>(n), static_cast<std::int64_t>(n - ranks[j]),
                                         static_cast<std::int64_t>(n_treated)},
                                        a);
        }
        std::size_t hits = 0;
        for (std::size_t m = 0; m < mc_draws; ++m) {
            for (std::size_t j = 0; j < J; ++j) {
                if (static_cast<std::int64_t>(counts[m * J + j]) > q[j]) {
                    ++hits;
                    break;
                }
            }
        }
        return static_cast<double>(hits) / static_cast<double>(mc_draws);
    };

    double hi = alpha_target;
    const double at_target = union_probability(hi);
    if (at_target <= alpha_target) return {hi, at_target};

    double lo = alpha_target / static_cast<double>(J);
    double at_lo = union_probability(lo);
    while (at_lo > alpha_target) {
        lo /= 2.0;
        if (lo < 1e-12) {
            throw ValidationError("cannot bracket the simultaneous level: union probability at alpha=" +
                                  std::to_string(lo) + " is " + std::to_string(at_lo) +
                                  " but the target is " + std::to_string(alpha_target));
        }
        at_lo = union_probability(lo);
    }
    while (hi - lo > 1e-4) {
        const double mid = 0.5 * (lo + hi);
        const double at_mid = union_probability(mid);
        if (at_mid <= alpha_target) {
            lo = mid;
            at_lo = at_mid;
        } else {
            hi = mid;
        }
    }
    return {lo, at_lo};
}

PlaceboSimultaneousResult placebo_simultaneous(const OutcomeTable& table,
                                               const std::vector<std::size_t>& ranks,
                                               double alpha_target, std::size_t mc_draws,
                                               std::uint64_t seed, unsigned workers) {
    validate_table(table, TableMode::placebo);
    const auto level = calibrate_simultaneous_level(table.size(), table.treated_count(), ranks, alpha_target,
                                                    mc_draws, seed, workers);
    PlaceboSimultaneousResult out;
    out.level = level;
    out.profile.quantile_ranks = ranks;
    out.profile.level = 1.0 - alpha_target;
    out.profile.simultaneous = true;
    out.profile.method_tag = "placebo-hypergeometric";
    for (auto k : ranks) out.profile.lower_limits.push_back(placebo_ci_quantile(table, k, level.per_test_alpha).lower);
    monotonize(out.profile.lower_limits);
    return out;
}

OutcomeTable lod_shift(const OutcomeTable& table, double lod) {
    if (!std::isfinite(lod)) throw ValidationError("lod must be finite");
    auto y = table.outcomes();
    for (auto& v : y) v -= lod;
    auto rows = table.rows();
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].outcome = y[i];
    return OutcomeTable(std::move(rows), 0.0);
}

PlaceboInferenceResult placebo_inference(const OutcomeTable& table,
                                         const std::vector<std::size_t>& ranks,
                                         const std::vector<double>& thresholds, double alpha,
                                         bool simultaneous, std::size_t mc_draws,
                                         std::uint64_t seed) {
    PlaceboInferenceResult out;
    out.alpha = alpha;
    if (simultaneous && !ranks.empty()) {
        out.profile = placebo_simultaneous(table, ranks, alpha, mc_draws, seed).profile;
    } else {
        out.profile.quantile_ranks = ranks;
        out.profile.level = 1.0 - alpha;
        out.profile.method_tag = "placebo-hypergeometric";
        for (auto k : ranks) out.profile.lower_limits.push_back(placebo_ci_quantile(table, k, alpha).lower);
    }
    for (double c : thresholds) out.count_limits[c] = placebo_ci_count(table, c, alpha);
    return out;
}

}  // namespace itequant
