#pragma once

// ITE quantile inference for stratified (block-randomized) designs: the
// stratified rank sum, its worst case via a multiple-choice knapsack, and
// Rosenbaum-style sensitivity analysis for matched pairs.

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "itequant/core_model.hpp"
#include "itequant/quantile_cre.hpp"
#include "itequant/rankstat.hpp"

namespace itequant {

/// Number of treated units given arbitrarily large effects in each stratum.
struct StratifiedAllocation {
    std::vector<std::size_t> per_stratum;
    std::size_t total = 0;
};

enum class KnapsackSolver { dp, greedy };

struct KnapsackResult {
    double statistic = 0.0;
    StratifiedAllocation allocation;
};

/// Per-stratum worst-case evaluators sharing one analysis-wide tie-break
/// order. `specs` holds one spec for all strata or one per stratum; the
/// tie-break seed of the first spec applies throughout.
class StratifiedEngine {
public:
    StratifiedEngine(const OutcomeTable& table, const std::vector<RankScoreSpec>& specs);

    std::size_t strata() const { return layout_.size(); }
    const StratumLayout& layout() const { return layout_; }
    std::size_t treated_in(std::size_t s) const { return evaluators_[s].treated_count(); }
    std::size_t treated_count() const { return n_treated_; }
    std::size_t size() const { return layout_.stratum_of.size(); }
    const std::vector<double>& scores(std::size_t s) const { return scores_[s]; }

    /// Minimal t_s when exactly b treated units in s take the lowest ranks.
    double option_value(std::size_t s, std::size_t b, double c) const;

    /// Minimum of sum_s option_value(s, b_s, c) subject to sum_s b_s = total.
    KnapsackResult minimize(double c, std::size_t total, KnapsackSolver solver) const;

    /// Y_i - Y_j for treated i and control j in the same stratum, plus the
    /// treated outcomes. Sorted, unique.
    std::vector<double> candidates() const;

private:
    StratumLayout layout_;
    std::vector<WorstCaseEvaluator> evaluators_;
    std::vector<std::vector<double>> scores_;
    std::vector<std::vector<double>> outcomes_;
    std::vector<std::vector<int>> arms_;
    std::size_t n_treated_ = 0;
};

/// t_str(z, y) = sum_s t_s(z_s, y_s) with within-stratum ranks.
double stratified_stat(std::span<const int> z, std::span<const double> y, const StratumLayout& layout,
                       const std::vector<RankScoreSpec>& specs);

double stratum_option_value(const OutcomeTable& table, std::size_t s, std::size_t b, double c,
                            const std::vector<RankScoreSpec>& specs);

KnapsackResult knapsack_min_stat(const OutcomeTable& table, const QuantileHypothesis& h,
                                 const std::vector<RankScoreSpec>& specs, KnapsackSolver solver);

/// Distribution of t_str under independent complete randomization within
/// strata: exact product enumeration within the cap, else Monte Carlo.
NullDistribution stratified_null_distribution(const StratifiedEngine& engine, const InferenceOptions& options);

double pvalue_quantile_stratified(const OutcomeTable& table, const QuantileHypothesis& h,
                                  const std::vector<RankScoreSpec>& specs, KnapsackSolver solver,
                                  const InferenceOptions& options);

enum class StratifiedMethod { m1, m2 };

/// Lower limits for `ranks`. m1: one knapsack test per rank at level alpha.
/// m2: treated-arm and control-arm limits pooled and sorted, level 1 - 2 alpha.
ITEProfileCI stratified_profile(const OutcomeTable& table, const std::vector<std::size_t>& ranks, double alpha,
                                const std::vector<RankScoreSpec>& specs, StratifiedMethod method,
                                KnapsackSolver solver, const InferenceOptions& options);

/// Worst-case p-value for H_{k,c} in a matched-pair design when, within each
/// pair, the odds of treatment may differ by up to gamma.
double sensitivity_pvalue_pairs(const OutcomeTable& table, const QuantileHypothesis& h, double gamma,
                                const RankScoreSpec& spec, const InferenceOptions& options);

/// Lower limits for `ranks` at each gamma in the grid.
struct SensitivityCurve {
    std::vector<double> gammas;
    std::vector<ITEProfileCI> profiles;  // one per gamma
};

SensitivityCurve sensitivity_profile_pairs(const OutcomeTable& table, const std::vector<std::size_t>& ranks,
                                           double alpha, const std::vector<double>& gammas,
                                           const RankScoreSpec& spec, const InferenceOptions& options);

/// Delta with (Lambda Delta + 1) / (Lambda + Delta) = gamma; needs lambda > gamma > 1.
double amplify_gamma(double gamma, double lambda);

/// (Lambda, Delta) pairs on the amplification curve for each lambda.
std::vector<std::pair<double, double>> amplification_curve(double gamma, const std::vector<double>& lambdas);

/// The point with Lambda = Delta: gamma + sqrt(gamma^2 - 1).
double amplification_diagonal(double gamma);

}  // namespace itequant
