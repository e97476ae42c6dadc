#include "itequant/quantile_cre.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include "itequant/error.hpp"
#include "itequant/hyperexact.hpp"
#include "itequant/parallel.hpp"
#include "itequant/random.hpp"

namespace itequant {

namespace {

constexpr std::uint64_t kCalibrateTreated = 0x6d33747265617431ULL;
constexpr std::uint64_t kCalibrateControl = 0x6d33636f6e747231ULL;

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
}

void check_ranks(const std::vector<std::size_t>& ranks, std::size_t n) {
    if (!std::is_sorted(ranks.begin(), ranks.end())) throw ValidationError("ranks must be sorted");
    for (auto k : ranks) {
        if (k < 1 || k > n) throw ValidationError("rank " + std::to_string(k) + " outside 1.." + std::to_string(n));
    }
}

std::size_t m1_sink(std::size_t n, std::size_t n_treated, std::size_t k) {
    return std::min(n - k, n_treated);
}

// Small process-wide memo; entries are immutable once inserted.
template <typename Key, typename Value>
class Memo {
public:
    template <typename Make>
    std::shared_ptr<const Value> get(const Key& key, Make&& make) {
        {
            std::lock_guard lock(mutex_);
            if (auto it = entries_.find(key); it != entries_.end()) return it->second;
        }
        auto value = std::make_shared<const Value>(make());
        std::lock_guard lock(mutex_);
        if (entries_.size() >= kCapacity) entries_.clear();
        return entries_.emplace(key, std::move(value)).first->second;
    }

private:
    static constexpr std::size_t kCapacity = 256;
    std::mutex mutex_;
    std::map<Key, std::shared_ptr<const Value>> entries_;
};

using NullKey = std::tuple<int, int, std::size_t, std::size_t, int, std::size_t, std::uint64_t, std::size_t>;
using LevelKey = std::tuple<std::size_t, std::size_t, std::vector<std::size_t>, double, std::size_t, std::uint64_t>;

Memo<NullKey, NullDistribution>& null_memo() {
    static Memo<NullKey, NullDistribution> memo;
    return memo;
}

Memo<LevelKey, double>& level_memo() {
    static Memo<LevelKey, double> memo;
    return memo;
}

double shared_level(std::size_t n, std::size_t n_arm, const std::vector<std::size_t>& ranks, double target,
                    const InferenceOptions& options, std::uint64_t seed) {
    const LevelKey key{n, n_arm, ranks, target, options.mc_draws, seed};
    return *level_memo().get(key, [&] {
        return calibrate_simultaneous_level(n, n_arm, ranks, target, options.mc_draws, seed, options.workers)
            .per_test_alpha;
    });
}

}  // namespace

std::shared_ptr<const NullDistribution> shared_score_null(const RankScoreSpec& spec, std::size_t n,
                                                          std::size_t n_treated, const InferenceOptions& options) {
    const auto mode = resolve_mode(options, assignment_count(n, n_treated));
    // Exact distributions ignore the Monte Carlo settings.
    const bool mc = mode == NullMode::monte_carlo;
    const NullKey key{static_cast<int>(spec.kind), spec.kind == ScoreKind::stephenson ? spec.s : 0, n, n_treated,
                      static_cast<int>(mode), mc ? options.mc_draws : 0, mc ? options.seed : 0,
                      mc ? 0 : options.exact_cap};
    return null_memo().get(key, [&] { return score_null_distribution(score_table(spec, n), n_treated, options); });
}

WorstCaseEvaluator::WorstCaseEvaluator(const OutcomeTable& table, TieBreak tiebreak)
    : y_(table.outcomes()) {
    if (tiebreak.size() != y_.size()) throw ValidationError("tie-break order length differs from outcomes");
    priority_.assign(tiebreak.priority().begin(), tiebreak.priority().end());
    const auto& z = table.assignment();
    for (std::size_t i = 0; i < y_.size(); ++i) (z[i] == 1 ? treated_ : controls_).push_back(i);
    auto by_value = [&](std::size_t a, std::size_t b) {
        if (y_[a] != y_[b]) return y_[a] < y_[b];
        return priority_[a] < priority_[b];
    };
    std::sort(treated_.begin(), treated_.end(), by_value);
    std::sort(controls_.begin(), controls_.end(), by_value);
}

std::vector<std::size_t> WorstCaseEvaluator::treated_order(double c) const {
    // Rounding in y - c can merge neighbours; an insertion pass restores the
    // (adjusted value, priority) order in O(N_1) for the usual near-sorted input.
    std::vector<std::size_t> order = treated_;
    auto key_less = [&](std::size_t a, std::size_t b) {
        const double va = y_[a] - c, vb = y_[b] - c;
        if (va != vb) return va < vb;
        return priority_[a] < priority_[b];
    };
    for (std::size_t i = 1; i < order.size(); ++i) {
        const std::size_t item = order[i];
        std::size_t j = i;
        while (j > 0 && key_less(item, order[j - 1])) {
            order[j] = order[j - 1];
            --j;
        }
        order[j] = item;
    }
    return order;
}

double WorstCaseEvaluator::statistic(double c, std::size_t sink, std::span<const double> scores) const {
    const std::size_t n1 = treated_.size();
    if (sink > n1) throw ValidationError("more sunk units than treated units");
    if (scores.size() != y_.size()) throw ValidationError("score table length differs from outcomes");
    const auto order = treated_order(c);
    double total = 0.0;
    for (std::size_t r = 0; r < sink; ++r) total += scores[r];
    std::size_t below = 0;  // controls ranked below the current treated unit
    for (std::size_t t = 0; t + sink < n1; ++t) {
        const std::size_t i = order[t];
        const double a = y_[i] - c;
        while (below < controls_.size()) {
            const std::size_t j = controls_[below];
            if (y_[j] < a || (y_[j] == a && priority_[j] < priority_[i])) {
                ++below;
            } else {
                break;
            }
        }
        total += scores[sink + t + below];
    }
    return total;
}

std::vector<std::size_t> WorstCaseEvaluator::large_set(double c, std::size_t sink) const {
    if (sink > treated_.size()) throw ValidationError("more sunk units than treated units");
    const auto order = treated_order(c);
    return {order.end() - static_cast<std::ptrdiff_t>(sink), order.end()};
}

WorstCaseResult worst_case_statistic(const OutcomeTable& table, const QuantileHypothesis& h,
                                     const RankScoreSpec& spec) {
    const std::size_t n = table.size();
    if (h.k < 1 || static_cast<std::size_t>(h.k) > n) throw ValidationError("k out of range");
    const WorstCaseEvaluator eval(table, TieBreak::from_seed(spec.tiebreak_seed, n));
    const auto scores = score_table(spec, n);
    const std::size_t sink = m1_sink(n, table.treated_count(), static_cast<std::size_t>(h.k));
    WorstCaseResult out;
    out.statistic = eval.statistic(h.c, sink, scores);
    out.delta.large_set = eval.large_set(h.c, sink);
    out.delta.base_value = h.c;
    return out;
}

std::vector<double> candidate_thresholds(const OutcomeTable& table) {
    const auto& z = table.assignment();
    const auto& y = table.outcomes();
    std::vector<double> out;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (z[i] != 1) continue;
        out.push_back(y[i]);
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (z[j] == 0) out.push_back(y[i] - y[j]);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double invert_over_grid(const std::vector<double>& candidates, const std::function<bool(double)>& accept) {
    if (candidates.empty()) return accept(0.0) ? kNegInf : std::numeric_limits<double>::infinity();
    const std::size_t m = candidates.size();
    auto step = [](double v) { return std::max(1.0, std::abs(v)); };
    // A point inside the open interval just above candidate i.
    auto probe = [&](std::size_t i) {
        if (i + 1 < m) return candidates[i] + (candidates[i + 1] - candidates[i]) / 2.0;
        return candidates[i] + step(candidates[i]);
    };
    if (accept(candidates.front() - step(candidates.front()))) return kNegInf;
    std::size_t lo = 0, hi = m;  // first accepted index lies in [lo, hi]
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (accept(probe(mid))) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return lo < m ? candidates[lo] : std::numeric_limits<double>::infinity();
}

RankTestEngine::RankTestEngine(const OutcomeTable& table, const RankScoreSpec& spec,
                               const InferenceOptions& options)
    : evaluator_(table, TieBreak::from_seed(spec.tiebreak_seed, table.size())),
      scores_(score_table(spec, table.size())),
      null_(shared_score_null(spec, table.size(), table.treated_count(), options)),
      candidates_(candidate_thresholds(table)) {}

double RankTestEngine::pvalue(double c, std::size_t sink) const {
    return tail_probability(*null_, statistic(c, sink));
}

double RankTestEngine::lower_limit(std::size_t sink, double threshold) const {
    // Every attainable statistic has positive null weight, so p > 0 always.
    if (threshold <= 0.0) return kNegInf;
    return invert_over_grid(candidates_, [&](double c) { return pvalue(c, sink) > threshold; });
}

double pvalue_quantile_m1(const OutcomeTable& table, const QuantileHypothesis& h, const RankScoreSpec& spec,
                          const InferenceOptions& options) {
    validate_table(table, TableMode::cre);
    const std::size_t n = table.size();
    if (h.k < 0 || static_cast<std::size_t>(h.k) > n) throw ValidationError("k out of range");
    if (h.k == 0) return 1.0;
    const RankTestEngine engine(table, spec, options);
    return engine.pvalue(h.c, m1_sink(n, table.treated_count(), static_cast<std::size_t>(h.k)));
}

std::string MethodConfig::name() const {
    switch (method) {
        case Method::m1:
            return "M1-" + stat_primary.tag();
        case Method::m2:
            return "M2-" + stat_primary.tag() + "-" + stat_flipped.tag();
        case Method::m3:
            return "M3-" + stat_primary.tag() + "-" + stat_flipped.tag();
    }
    return "?";
}

MethodConfig parse_method(const std::string& name, std::uint64_t tiebreak_seed) {
    std::vector<std::string> parts;
    std::stringstream ss(name);
    for (std::string part; std::getline(ss, part, '-');) parts.push_back(part);
    MethodConfig config;
    if (parts.empty()) throw ValidationError("empty method name");
    const std::string& head = parts[0];
    if (head == "M1" || head == "m1") {
        config.method = Method::m1;
    } else if (head == "M2" || head == "m2") {
        config.method = Method::m2;
    } else if (head == "M3" || head == "m3") {
        config.method = Method::m3;
    } else {
        throw ValidationError("unknown method '" + name + "'");
    }
    const std::size_t expected = config.method == Method::m1 ? 2 : 3;
    if (parts.size() != expected) {
        throw ValidationError("method '" + name + "' needs " + std::to_string(expected - 1) + " rank score(s)");
    }
    config.stat_primary = parse_score_spec(parts[1], tiebreak_seed);
    config.stat_flipped = parse_score_spec(parts.back(), tiebreak_seed);
    return config;
}

ITEProfileCI simultaneous_profile_m1(const OutcomeTable& table, const std::vector<std::size_t>& ranks,
                                     double alpha, const MethodConfig& config, const InferenceOptions& options) {
    validate_table(table, TableMode::cre);
    check_alpha(alpha);
    const std::size_t n = table.size();
    check_ranks(ranks, n);
    const RankTestEngine engine(table, config.stat_primary, options);

    // Ranks sharing a sink count share a limit.
    std::vector<std::size_t> sinks;
    for (auto k : ranks) sinks.push_back(m1_sink(n, table.treated_count(), k));
    std::vector<std::size_t> distinct = sinks;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<double> by_sink(distinct.size());
    parallel_for(distinct.size(), options.workers,
                 [&](std::size_t i) { by_sink[i] = engine.lower_limit(distinct[i], alpha); });

    ITEProfileCI out;
    out.quantile_ranks = ranks;
    for (auto s : sinks) {
        const auto pos = std::lower_bound(distinct.begin(), distinct.end(), s) - distinct.begin();
        out.lower_limits.push_back(by_sink[static_cast<std::size_t>(pos)]);
    }
    monotonize(out.lower_limits);
    out.level = 1.0 - alpha;
    out.simultaneous = true;
    out.method_tag = config.name();
    return out;
}

OneSidedInterval invert_ci_quantile(const OutcomeTable& table, std::size_t k, double alpha,
                                    const MethodConfig& config, const InferenceOptions& options) {
    const auto profile = quantile_profile(table, {k}, alpha, config, options, false);
    OneSidedInterval out;
    out.lower = profile.lower_limits.front();
    out.level = profile.level;
    out.kind = CoverageKind::pointwise;
    return out;
}

ITEProfileCI m2_profile(const OutcomeTable& table, const std::vector<std::size_t>& ranks, double alpha,
                        const MethodConfig& config, const InferenceOptions& options) {
    validate_table(table, TableMode::cre);
    check_alpha(alpha);
    if (alpha > 0.25) throw ValidationError("the pooled method needs alpha <= 0.25");
    const std::size_t n = table.size();
    check_ranks(ranks, n);

    // Limits for the k-th smallest ITE within one arm: at most n_arm - k of
    // that arm's effects may exceed c.
    auto arm_limits = [&](const OutcomeTable& t, const RankScoreSpec& spec) {
        const std::size_t n_arm = t.treated_count();
        std::vector<double> limits(n_arm);
        if (n_arm == 0) return limits;
        const RankTestEngine engine(t, spec, options);
        parallel_for(n_arm, options.workers,
                     [&](std::size_t j) { limits[j] = engine.lower_limit(n_arm - (j + 1), alpha); });
        return limits;
    };
    std::vector<double> pooled = arm_limits(table, config.stat_primary);
    const auto control = arm_limits(table.flipped(), config.stat_flipped);
    pooled.insert(pooled.end(), control.begin(), control.end());
    std::sort(pooled.begin(), pooled.end());

    ITEProfileCI out;
    out.quantile_ranks = ranks;
    for (auto k : ranks) out.lower_limits.push_back(pooled[k - 1]);
    out.level = 1.0 - 2.0 * alpha;
    out.simultaneous = true;
    out.method_tag = config.name();
    return out;
}

BergerBoosPValue m3_pvalue(const OutcomeTable& table, const QuantileHypothesis& h, const RankScoreSpec& spec,
                           double gamma, double set_alpha, const InferenceOptions& options) {
    validate_table(table, TableMode::cre);
    const std::size_t n = table.size();
    if (h.k < 0 || static_cast<std::size_t>(h.k) > n) throw ValidationError("k out of range");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("gamma must lie in (0, 1)");
    if (!(set_alpha > 0.0 && set_alpha < 1.0)) throw ValidationError("confidence-set level must lie in (0, 1)");
    const HypergeomParams params{static_cast<std::int64_t>(n), static_cast<std::int64_t>(n) - h.k,
                                 static_cast<std::int64_t>(table.treated_count())};
    const RankTestEngine engine(table, spec, options);
    BergerBoosPValue out;
    out.b_upper = hyper_upper_quantile(params, set_alpha);
    double worst = 0.0;
    for (std::int64_t b = params.support_min(); b <= out.b_upper; ++b) {
        const double p = engine.pvalue(h.c, static_cast<std::size_t>(b));
        out.conditional.emplace_back(b, p);
        worst = std::max(worst, p);
    }
    out.pvalue = std::min(1.0, worst + gamma);
    return out;
}

ITEProfileCI m3_profile(const OutcomeTable& table, const std::vector<std::size_t>& ranks, double alpha,
                        const MethodConfig& config, const InferenceOptions& options, bool simultaneous) {
    validate_table(table, TableMode::cre);
    check_alpha(alpha);
    const double gamma = config.berger_boos_gamma > 0.0 ? config.berger_boos_gamma : alpha / 10.0;
    if (!(gamma < alpha)) throw ValidationError("Berger-Boos gamma must lie in (0, alpha)");
    const std::size_t n = table.size();
    check_ranks(ranks, n);
    if (table.control_count() == 0) throw ValidationError("empty control arm");

    const double step_alpha = alpha / 2.0;
    const double step_gamma = gamma / 2.0;

    // One arm at level step_alpha: p = p(b_up) + step_gamma, so c is retained
    // iff G(t(c, b_up)) > step_alpha - step_gamma.
    auto side = [&](const OutcomeTable& t, const RankScoreSpec& spec, std::uint64_t tag) {
        const std::size_t n_arm = t.treated_count();
        double set_alpha = step_gamma;
        if (simultaneous && ranks.size() > 1) {
            set_alpha = shared_level(n, n_arm, ranks, step_gamma, options, derive_seed(options.seed, tag));
        }
        const RankTestEngine engine(t, spec, options);
        std::vector<double> limits(ranks.size());
        parallel_for(ranks.size(), options.workers, [&](std::size_t j) {
            const HypergeomParams params{static_cast<std::int64_t>(n),
                                         static_cast<std::int64_t>(n - ranks[j]),
                                         static_cast<std::int64_t>(n_arm)};
            const auto b_up = static_cast<std::size_t>(hyper_upper_quantile(params, set_alpha));
            limits[j] = engine.lower_limit(b_up, step_alpha - step_gamma);
        });
        return limits;
    };
    const auto treated = side(table, config.stat_primary, kCalibrateTreated);
    const auto control = side(table.flipped(), config.stat_flipped, kCalibrateControl);

    ITEProfileCI out;
    out.quantile_ranks = ranks;
    for (std::size_t j = 0; j < ranks.size(); ++j) out.lower_limits.push_back(std::max(treated[j], control[j]));
    monotonize(out.lower_limits);
    out.level = 1.0 - alpha;
    out.simultaneous = simultaneous || ranks.size() == 1;
    out.method_tag = config.name();
    return out;
}

ITEProfileCI quantile_profile(const OutcomeTable& table, const std::vector<std::size_t>& ranks, double alpha,
                              const MethodConfig& config, const InferenceOptions& options, bool simultaneous) {
    switch (config.method) {
        case Method::m1:
            return simultaneous_profile_m1(table, ranks, alpha, config, options);
        case Method::m2:
            return m2_profile(table, ranks, alpha, config, options);
        case Method::m3:
            return m3_profile(table, ranks, alpha, config, options, simultaneous);
    }
    throw ValidationError("unknown method");
}

}  // namespace itequant
