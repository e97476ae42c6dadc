#pragma once

// Worst-case randomization inference for ITE quantiles in completely
// randomized experiments: the base method (M1) and the two enhanced
// methods that pool treated/control inference (M2) or treat the number of
// treated large effects as a nuisance (M3).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "itequant/core_model.hpp"
#include "itequant/rankstat.hpp"

namespace itequant {

/// Effects compatible with H_{k,c} that minimize a rank-score statistic:
/// units in large_set get arbitrarily large effects, everyone else c.
struct WorstCaseDelta {
    std::vector<std::size_t> large_set;  // row indices, ascending by outcome
    double base_value = 0.0;
};

struct WorstCaseResult {
    double statistic = 0.0;
    WorstCaseDelta delta;
};

/// Evaluates t(Z, Y - Z o delta) for the closed-form minimizer on one table.
/// Outcomes and the tie-break order are fixed at construction; evaluation is
/// O(N) per (c, sink) apart from a near-sorted insertion pass.
class WorstCaseEvaluator {
public:
    WorstCaseEvaluator(const OutcomeTable& table, TieBreak tiebreak);

    std::size_t size() const { return y_.size(); }
    std::size_t treated_count() const { return treated_.size(); }

    /// Statistic when the `sink` treated units with the largest adjusted
    /// outcomes take the lowest ranks and the rest are shifted down by c.
    double statistic(double c, std::size_t sink, std::span<const double> scores) const;

    /// The units that sink at threshold c.
    std::vector<std::size_t> large_set(double c, std::size_t sink) const;

private:
    std::vector<std::size_t> treated_order(double c) const;

    std::vector<double> y_;
    std::vector<std::uint32_t> priority_;
    std::vector<std::size_t> treated_;   // ascending by (y, priority)
    std::vector<std::size_t> controls_;  // ascending by (y, priority)
};

/// inf over H_{k,c} of the rank-score statistic, with the minimizing delta.
WorstCaseResult worst_case_statistic(const OutcomeTable& table, const QuantileHypothesis& h,
                                     const RankScoreSpec& spec);

/// Thresholds at which worst-case p-values can jump: Y_i - Y_j for treated i
/// and control j, plus the treated outcomes. Sorted, unique.
std::vector<double> candidate_thresholds(const OutcomeTable& table);

/// inf{c : accept(c)} for a predicate that is monotone (false then true) in
/// c and constant between consecutive candidates. Binary search over the
/// open intervals between candidates; -inf if accept holds below all of them.
double invert_over_grid(const std::vector<double>& candidates, const std::function<bool(double)>& accept);

/// Shared state for repeated worst-case tests on one table and statistic.
class RankTestEngine {
public:
    RankTestEngine(const OutcomeTable& table, const RankScoreSpec& spec, const InferenceOptions& options);

    std::size_t size() const { return evaluator_.size(); }
    std::size_t treated_count() const { return evaluator_.treated_count(); }
    const NullDistribution& null() const { return *null_; }
    const std::vector<double>& candidates() const { return candidates_; }

    double statistic(double c, std::size_t sink) const { return evaluator_.statistic(c, sink, scores_); }
    double pvalue(double c, std::size_t sink) const;

    /// inf{c : G(t(c, sink)) > threshold}.
    double lower_limit(std::size_t sink, double threshold) const;

private:
    WorstCaseEvaluator evaluator_;
    std::vector<double> scores_;
    std::shared_ptr<const NullDistribution> null_;
    std::vector<double> candidates_;
};

/// Rank-score null distribution, memoized on (scores, N_1, options) since it
/// does not depend on the data. Thread-safe.
std::shared_ptr<const NullDistribution> shared_score_null(const RankScoreSpec& spec, std::size_t n,
                                                          std::size_t n_treated, const InferenceOptions& options);

/// p^R_{k,c} = G(inf over H_{k,c} of t).
double pvalue_quantile_m1(const OutcomeTable& table, const QuantileHypothesis& h, const RankScoreSpec& spec,
                          const InferenceOptions& options);

enum class Method { m1, m2, m3 };

struct MethodConfig {
    Method method = Method::m1;
    RankScoreSpec stat_primary{};
    RankScoreSpec stat_flipped{};
    double berger_boos_gamma = 0.0;  // M3 only; 0 selects alpha / 10

    /// M1-S2, M2-S2-S6, M3-S6-S6, ...
    std::string name() const;
};

/// Parses names such as "M1-S2", "M2-S2-S6", "M3-W-S6".
MethodConfig parse_method(const std::string& name, std::uint64_t tiebreak_seed = 0);

/// M1 lower limit for tau_(k) at level 1 - alpha.
OneSidedInterval invert_ci_quantile(const OutcomeTable& table, std::size_t k, double alpha,
                                    const MethodConfig& config, const InferenceOptions& options);

/// M1 limits for all requested ranks; jointly valid at 1 - alpha.
ITEProfileCI simultaneous_profile_m1(const OutcomeTable& table, const std::vector<std::size_t>& ranks,
                                     double alpha, const MethodConfig& config, const InferenceOptions& options);

/// M2: level-alpha limits for treated ITEs and (after flipping) control
/// ITEs, pooled and sorted. Simultaneous at level 1 - 2 alpha.
ITEProfileCI m2_profile(const OutcomeTable& table, const std::vector<std::size_t>& ranks, double alpha,
                        const MethodConfig& config, const InferenceOptions& options);

/// Berger-Boos p-value for H_{k,c} with nuisance b = treated units among the
/// N - k largest effects.
struct BergerBoosPValue {
    double pvalue = 0.0;
    std::int64_t b_upper = 0;                         // max of the confidence set
    std::vector<std::pair<std::int64_t, double>> conditional;  // (b, p(b)) over the set
};

/// Confidence set {support_min, ..., Q_H(1 - set_alpha; N, N - k, N_1)} for
/// b; reported p = max_b p(b) + gamma.
BergerBoosPValue m3_pvalue(const OutcomeTable& table, const QuantileHypothesis& h, const RankScoreSpec& spec,
                           double gamma, double set_alpha, const InferenceOptions& options);

/// M3: Berger-Boos limits on the raw and flipped tables, each at alpha/2
/// with gamma/2, combined by taking the larger limit. With `simultaneous`,
/// the per-rank confidence sets are calibrated jointly over `ranks`.
ITEProfileCI m3_profile(const OutcomeTable& table, const std::vector<std::size_t>& ranks, double alpha,
                        const MethodConfig& config, const InferenceOptions& options, bool simultaneous);

/// Dispatches on config.method. `alpha` is the per-step level for M2
/// (output level 1 - 2 alpha) and the overall level otherwise.
ITEProfileCI quantile_profile(const OutcomeTable& table, const std::vector<std::size_t>& ranks, double alpha,
                              const MethodConfig& config, const InferenceOptions& options, bool simultaneous);

}  // namespace itequant
