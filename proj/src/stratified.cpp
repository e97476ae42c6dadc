#include "itequant/stratified.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "itequant/error.hpp"
#include "itequant/parallel.hpp"
#include "itequant/random.hpp"

namespace itequant {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const RankScoreSpec& spec_for(const std::vector<RankScoreSpec>& specs, std::size_t s) {
    return specs.size() == 1 ? specs.front() : specs[s];
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
}

void check_rank(int k, std::size_t n) {
    if (k < 0 || static_cast<std::size_t>(k) > n) throw ValidationError("k out of range");
}

std::size_t worst_sink(std::size_t n, std::size_t n_treated, std::size_t k) {
    return std::min(n - k, n_treated);
}

// Distribution of a sum of independent per-stratum statistics.
NullDistribution convolve(const std::vector<NullDistribution>& parts) {
    std::vector<std::pair<double, double>> acc{{0.0, 1.0}};
    for (const auto& part : parts) {
        std::vector<std::pair<double, double>> next;
        next.reserve(acc.size() * part.values().size());
        for (const auto& [v, w] : acc) {
            for (std::size_t i = 0; i < part.values().size(); ++i) {
                next.emplace_back(v + part.values()[i], w * part.counts()[i]);
            }
        }
        auto merged = NullDistribution::from_weighted(std::move(next));
        acc.clear();
        for (std::size_t i = 0; i < merged.values().size(); ++i) acc.emplace_back(merged.values()[i], merged.counts()[i]);
    }
    return NullDistribution::from_weighted(std::move(acc));
}

double product_of_counts(const StratifiedEngine& engine) {
    double count = 1.0;
    for (std::size_t s = 0; s < engine.strata(); ++s) {
        count *= assignment_count(engine.layout().members[s].size(), engine.treated_in(s));
    }
    return count;
}

// Lower convex envelope of option values, evaluated at the greedy counts.
struct Envelope {
    std::vector<std::size_t> at;  // vertex positions b
    std::vector<double> value;    // option values at the vertices
};

Envelope lower_envelope(const std::vector<double>& v) {
    Envelope env;
    for (std::size_t b = 0; b < v.size(); ++b) {
        // Drop the last vertex only when it lies strictly above the chord.
        while (env.at.size() >= 2) {
            const std::size_t n = env.at.size();
            const double db1 = static_cast<double>(env.at[n - 1] - env.at[n - 2]);
            const double dv1 = env.value[n - 1] - env.value[n - 2];
            const double db2 = static_cast<double>(b - env.at[n - 2]);
            const double dv2 = v[b] - env.value[n - 2];
            if (db1 * dv2 - dv1 * db2 < 0.0) {
                env.at.pop_back();
                env.value.pop_back();
            } else {
                break;
            }
        }
        env.at.push_back(b);
        env.value.push_back(v[b]);
    }
    return env;
}

}  // namespace

StratifiedEngine::StratifiedEngine(const OutcomeTable& table, const std::vector<RankScoreSpec>& specs)
    : layout_(table.strata()) {
    validate_table(table, TableMode::stratified);
    if (specs.empty() || (specs.size() != 1 && specs.size() != layout_.size())) {
        throw ValidationError("stratum mismatch: need one rank score or one per stratum");
    }
    const auto global = TieBreak::from_seed(specs.front().tiebreak_seed, table.size());
    const auto prio = global.priority();
    const auto& z = table.assignment();
    const auto& y = table.outcomes();
    for (std::size_t s = 0; s < layout_.size(); ++s) {
        std::vector<int> zs;
        std::vector<double> ys;
        std::vector<std::uint32_t> ps;
        for (auto i : layout_.members[s]) {
            zs.push_back(z[i]);
            ys.push_back(y[i]);
            ps.push_back(prio[i]);
        }
        evaluators_.emplace_back(OutcomeTable::from_arrays(zs, ys), TieBreak::from_priorities(std::move(ps)));
        scores_.push_back(score_table(spec_for(specs, s), zs.size()));
        n_treated_ += evaluators_.back().treated_count();
        outcomes_.push_back(std::move(ys));
        arms_.push_back(std::move(zs));
    }
}

double StratifiedEngine::option_value(std::size_t s, std::size_t b, double c) const {
    if (s >= strata()) throw ValidationError("stratum index out of range");
    if (b > treated_in(s)) throw ValidationError("b exceeds the treated count of the stratum");
    return evaluators_[s].statistic(c, b, scores_[s]);
}

KnapsackResult StratifiedEngine::minimize(double c, std::size_t total, KnapsackSolver solver) const {
    if (total > n_treated_) throw ValidationError("allocation total exceeds the treated count");
    const std::size_t S = strata();
    std::vector<std::vector<double>> opts(S);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t b = 0; b <= treated_in(s); ++b) opts[s].push_back(option_value(s, b, c));
    }
    KnapsackResult out;
    out.allocation.per_stratum.assign(S, 0);
    out.allocation.total = total;

    if (solver == KnapsackSolver::dp) {
        // suffix[s][t]: best value from strata s.. with t sunk units.
        std::vector<std::vector<double>> suffix(S + 1, std::vector<double>(total + 1, kInf));
        suffix[S][0] = 0.0;
        for (std::size_t s = S; s-- > 0;) {
            for (std::size_t t = 0; t <= total; ++t) {
                for (std::size_t b = 0; b <= std::min(t, treated_in(s)); ++b) {
                    suffix[s][t] = std::min(suffix[s][t], opts[s][b] + suffix[s + 1][t - b]);
                }
            }
        }
        // Walk forward taking the smallest optimal b in each stratum.
        std::size_t t = total;
        for (std::size_t s = 0; s < S; ++s) {
            for (std::size_t b = 0; b <= std::min(t, treated_in(s)); ++b) {
                if (opts[s][b] + suffix[s + 1][t - b] == suffix[s][t]) {
                    out.allocation.per_stratum[s] = b;
                    t -= b;
                    break;
                }
            }
        }
        out.statistic = suffix[0][total];
        return out;
    }

    // Greedy: cheapest unit decrements along each stratum's convex envelope.
    struct Step {
        double dv, db;
        std::size_t s, seg;
    };
    std::vector<Envelope> envs;
    std::vector<Step> steps;
    for (std::size_t s = 0; s < S; ++s) {
        envs.push_back(lower_envelope(opts[s]));
        const auto& e = envs.back();
        for (std::size_t g = 0; g + 1 < e.at.size(); ++g) {
            const double db = static_cast<double>(e.at[g + 1] - e.at[g]);
            for (std::size_t u = e.at[g]; u < e.at[g + 1]; ++u) steps.push_back({e.value[g + 1] - e.value[g], db, s, g});
        }
    }
    std::stable_sort(steps.begin(), steps.end(), [](const Step& a, const Step& b) {
        const double lhs = a.dv * b.db, rhs = b.dv * a.db;
        if (lhs != rhs) return lhs < rhs;
        if (a.s != b.s) return a.s < b.s;
        return a.seg < b.seg;
    });
    for (std::size_t i = 0; i < total; ++i) ++out.allocation.per_stratum[steps[i].s];
    double value = 0.0;
    bool interpolated = false;
    for (std::size_t s = 0; s < S; ++s) {
        const auto& e = envs[s];
        const std::size_t b = out.allocation.per_stratum[s];
        const auto hi = std::lower_bound(e.at.begin(), e.at.end(), b) - e.at.begin();
        const auto g = static_cast<std::size_t>(hi);
        if (e.at[g] == b) {
            value += e.value[g];
        } else {
            const double frac = static_cast<double>(b - e.at[g - 1]) / static_cast<double>(e.at[g] - e.at[g - 1]);
            value += e.value[g - 1] + (e.value[g] - e.value[g - 1]) * frac;
            interpolated = true;
        }
    }
    // Interpolated envelope values carry rounding; nudge down so the bound
    // stays below the exact minimum.
    if (interpolated) value -= 1e-9 * std::max(1.0, std::abs(value));
    out.statistic = value;
    return out;
}

std::vector<double> StratifiedEngine::candidates() const {
    std::vector<double> out;
    for (std::size_t s = 0; s < strata(); ++s) {
        const auto& y = outcomes_[s];
        const auto& z = arms_[s];
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (z[i] != 1) continue;
            out.push_back(y[i]);
            for (std::size_t j = 0; j < y.size(); ++j) {
                if (z[j] == 0) out.push_back(y[i] - y[j]);
            }
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double stratified_stat(std::span<const int> z, std::span<const double> y, const StratumLayout& layout,
                       const std::vector<RankScoreSpec>& specs) {
    if (z.size() != y.size() || layout.stratum_of.size() != y.size()) {
        throw ValidationError("stratum mismatch: layout and data lengths differ");
    }
    if (specs.empty() || (specs.size() != 1 && specs.size() != layout.size())) {
        throw ValidationError("stratum mismatch: need one rank score or one per stratum");
    }
    const auto global = TieBreak::from_seed(specs.front().tiebreak_seed, y.size());
    double total = 0.0;
    for (std::size_t s = 0; s < layout.size(); ++s) {
        const auto& members = layout.members[s];
        const auto ranks = rank_subset(y, members, global);
        const auto scores = score_table(spec_for(specs, s), members.size());
        for (std::size_t j = 0; j < members.size(); ++j) {
            if (z[members[j]] == 1) total += scores[ranks[j] - 1];
        }
    }
    return total;
}

double stratum_option_value(const OutcomeTable& table, std::size_t s, std::size_t b, double c,
                            const std::vector<RankScoreSpec>& specs) {
    return StratifiedEngine(table, specs).option_value(s, b, c);
}

KnapsackResult knapsack_min_stat(const OutcomeTable& table, const QuantileHypothesis& h,
                                 const std::vector<RankScoreSpec>& specs, KnapsackSolver solver) {
    if (h.k < 1 || static_cast<std::size_t>(h.k) > table.size()) throw ValidationError("k out of range");
    const StratifiedEngine engine(table, specs);
    return engine.minimize(h.c, worst_sink(table.size(), table.treated_count(), static_cast<std::size_t>(h.k)),
                           solver);
}

NullDistribution stratified_null_distribution(const StratifiedEngine& engine, const InferenceOptions& options) {
    const std::size_t S = engine.strata();
    const auto mode = resolve_mode(options, product_of_counts(engine));
    if (mode == NullMode::exact) {
        std::vector<NullDistribution> parts;
        for (std::size_t s = 0; s < S; ++s) {
            const auto& scores = engine.scores(s);
            std::vector<double> samples;
            for_each_assignment(scores.size(), engine.treated_in(s), [&](std::span<const std::size_t> a) {
                double t = 0.0;
                for (auto i : a) t += scores[i];
                samples.push_back(t);
            });
            parts.push_back(NullDistribution::from_samples(NullMode::exact, std::move(samples)));
        }
        return convolve(parts);
    }
    if (options.mc_draws == 0) throw ValidationError("mc_draws must be positive");
    std::vector<double> samples(options.mc_draws);
    parallel_for(options.mc_draws, options.workers, [&](std::size_t m) {
        CounterRng rng(options.seed, m);
        double t = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            const auto& scores = engine.scores(s);
            const std::size_t k = engine.treated_in(s);
            std::vector<std::size_t> scratch(scores.size());
            sample_subset(rng, scratch, k);
            std::sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k));
            double part = 0.0;
            for (std::size_t j = 0; j < k; ++j) part += scores[scratch[j]];
            t += part;
        }
        samples[m] = t;
    });
    return NullDistribution::from_samples(NullMode::monte_carlo, std::move(samples));
}

double pvalue_quantile_stratified(const OutcomeTable& table, const QuantileHypothesis& h,
                                  const std::vector<RankScoreSpec>& specs, KnapsackSolver solver,
                                  const InferenceOptions& options) {
    check_rank(h.k, table.size());
    const StratifiedEngine engine(table, specs);
    if (h.k == 0) return 1.0;
    const auto null = stratified_null_distribution(engine, options);
    const std::size_t sink = worst_sink(table.size(), table.treated_count(), static_cast<std::size_t>(h.k));
    return tail_probability(null, engine.minimize(h.c, sink, solver).statistic);
}

namespace {

// Limits for sink counts 0..max_sink under one engine and reference law.
std::vector<double> limits_by_sink(const StratifiedEngine& engine, const NullDistribution& null,
                                   const std::vector<std::size_t>& sinks, double alpha, KnapsackSolver solver,
                                   unsigned workers) {
    const auto grid = engine.candidates();
    std::vector<double> out(sinks.size());
    parallel_for(sinks.size(), workers, [&](std::size_t j) {
        out[j] = invert_over_grid(grid, [&](double c) {
            return tail_probability(null, engine.minimize(c, sinks[j], solver).statistic) > alpha;
        });
    });
    return out;
}

}  // namespace

ITEProfileCI stratified_profile(const OutcomeTable& table, const std::vector<std::size_t>& ranks, double alpha,
                                const std::vector<RankScoreSpec>& specs, StratifiedMethod method,
                                KnapsackSolver solver, const InferenceOptions& options) {
    check_alpha(alpha);
    const std::size_t n = table.size();
    if (!std::is_sorted(ranks.begin(), ranks.end())) throw ValidationError("ranks must be sorted");
    for (auto k : ranks) {
        if (k < 1 || k > n) throw ValidationError("rank out of range");
    }
    ITEProfileCI out;
    out.quantile_ranks = ranks;
    out.simultaneous = true;
    const std::string stat_tag = spec_for(specs, 0).tag();

    if (method == StratifiedMethod::m1) {
        const StratifiedEngine engine(table, specs);
        const auto null = stratified_null_distribution(engine, options);
        std::vector<std::size_t> sinks;
        for (auto k : ranks) sinks.push_back(worst_sink(n, table.treated_count(), k));
        out.lower_limits = limits_by_sink(engine, null, sinks, alpha, solver, options.workers);
        monotonize(out.lower_limits);
        out.level = 1.0 - alpha;
        out.method_tag = "M1str-" + stat_tag;
        return out;
    }

    if (alpha > 0.25) throw ValidationError("the pooled method needs alpha <= 0.25");
    auto arm = [&](const OutcomeTable& t) {
        const StratifiedEngine engine(t, specs);
        const auto null = stratified_null_distribution(engine, options);
        std::vector<std::size_t> sinks;
        for (std::size_t k = 1; k <= engine.treated_count(); ++k) sinks.push_back(engine.treated_count() - k);
        return limits_by_sink(engine, null, sinks, alpha, solver, options.workers);
    };
    auto pooled = arm(table);
    const auto control = arm(table.flipped());
    pooled.insert(pooled.end(), control.begin(), control.end());
    std::sort(pooled.begin(), pooled.end());
    for (auto k : ranks) out.lower_limits.push_back(pooled[k - 1]);
    out.level = 1.0 - 2.0 * alpha;
    out.method_tag = "M2str-" + stat_tag;
    return out;
}

namespace {

void check_pairs(const StratifiedEngine& engine) {
    for (std::size_t s = 0; s < engine.strata(); ++s) {
        if (engine.layout().members[s].size() != 2 || engine.treated_in(s) != 1) {
            throw ValidationError("non-pair stratum: " + engine.layout().labels[s]);
        }
    }
}

// Reference law of the pair statistic when each pair puts its larger score
// on the treated unit with probability gamma / (1 + gamma).
NullDistribution pair_reference(const StratifiedEngine& engine, double gamma, const InferenceOptions& options) {
    if (!(gamma >= 1.0) || !std::isfinite(gamma)) throw ValidationError("gamma must be a finite value >= 1");
    if (gamma == 1.0) return stratified_null_distribution(engine, options);
    const std::size_t S = engine.strata();
    const auto mode = resolve_mode(options, product_of_counts(engine));
    if (mode == NullMode::exact) {
        std::vector<NullDistribution> parts;
        for (std::size_t s = 0; s < S; ++s) {
            const auto& sc = engine.scores(s);
            parts.push_back(NullDistribution::from_weighted({{sc[0], 1.0}, {sc[1], gamma}}));
        }
        return convolve(parts);
    }
    if (options.mc_draws == 0) throw ValidationError("mc_draws must be positive");
    const double upper = gamma / (1.0 + gamma);
    std::vector<double> samples(options.mc_draws);
    parallel_for(options.mc_draws, options.workers, [&](std::size_t m) {
        CounterRng rng(options.seed, m);
        double t = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            const auto& sc = engine.scores(s);
            t += rng.uniform01() < upper ? sc[1] : sc[0];
        }
        samples[m] = t;
    });
    return NullDistribution::from_samples(NullMode::monte_carlo, std::move(samples));
}

}  // namespace

double sensitivity_pvalue_pairs(const OutcomeTable& table, const QuantileHypothesis& h, double gamma,
                                const RankScoreSpec& spec, const InferenceOptions& options) {
    check_rank(h.k, table.size());
    const StratifiedEngine engine(table, {spec});
    check_pairs(engine);
    const auto reference = pair_reference(engine, gamma, options);
    if (h.k == 0) return 1.0;
    const std::size_t sink = worst_sink(table.size(), table.treated_count(), static_cast<std::size_t>(h.k));
    return tail_probability(reference, engine.minimize(h.c, sink, KnapsackSolver::dp).statistic);
}

SensitivityCurve sensitivity_profile_pairs(const OutcomeTable& table, const std::vector<std::size_t>& ranks,
                                           double alpha, const std::vector<double>& gammas,
                                           const RankScoreSpec& spec, const InferenceOptions& options) {
    check_alpha(alpha);
    const StratifiedEngine engine(table, {spec});
    check_pairs(engine);
    const std::size_t n = table.size();
    for (auto k : ranks) {
        if (k < 1 || k > n) throw ValidationError("rank out of range");
    }
    std::vector<std::size_t> sinks;
    for (auto k : ranks) sinks.push_back(worst_sink(n, table.treated_count(), k));
    SensitivityCurve curve;
    curve.gammas = gammas;
    for (double g : gammas) {
        const auto reference = pair_reference(engine, g, options);
        ITEProfileCI profile;
        profile.quantile_ranks = ranks;
        profile.lower_limits = limits_by_sink(engine, reference, sinks, alpha, KnapsackSolver::dp, options.workers);
        monotonize(profile.lower_limits);
        profile.level = 1.0 - alpha;
        profile.simultaneous = true;
        profile.method_tag = "pairs-" + spec.tag();
        curve.profiles.push_back(std::move(profile));
    }
    return curve;
}

double amplify_gamma(double gamma, double lambda) {
    if (!(gamma >= 1.0)) throw ValidationError("gamma must be >= 1");
    if (!(lambda > gamma)) throw ValidationError("lambda must exceed gamma");
    return (gamma * lambda - 1.0) / (lambda - gamma);
}

std::vector<std::pair<double, double>> amplification_curve(double gamma, const std::vector<double>& lambdas) {
    std::vector<std::pair<double, double>> out;
    for (double l : lambdas) out.emplace_back(l, amplify_gamma(gamma, l));
    return out;
}

double amplification_diagonal(double gamma) {
    if (!(gamma >= 1.0)) throw ValidationError("gamma must be >= 1");
    return gamma + std::sqrt(gamma * gamma - 1.0);
}

}  // namespace itequant
