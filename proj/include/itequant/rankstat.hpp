#pragma once

// Rank-score statistics, their randomization null distributions, the Fisher
// randomization test for sharp nulls, and the SATE baseline.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "itequant/core_model.hpp"

namespace itequant {

enum class ScoreKind { wilcoxon, stephenson };

/// Rank transform phi plus the seed of the pre-analysis tie-break order.
struct RankScoreSpec {
    ScoreKind kind = ScoreKind::wilcoxon;
    int s = 2;  // stephenson only
    std::uint64_t tiebreak_seed = 0;

    /// "W" or "S<s>", as used in method names such as M2-S2-S6.
    std::string tag() const;
};

RankScoreSpec wilcoxon_spec(std::uint64_t tiebreak_seed = 0);
RankScoreSpec stephenson_spec(int s, std::uint64_t tiebreak_seed = 0);

/// Parses "W", "wilcoxon", "S6", "stephenson6".
RankScoreSpec parse_score_spec(const std::string& text, std::uint64_t tiebreak_seed = 0);

/// A fixed random ordering of unit indices used to break ties; drawn once
/// per analysis and reused for every hypothesis.
class TieBreak {
public:
    TieBreak() = default;
    static TieBreak identity(std::size_t n);
    static TieBreak from_seed(std::uint64_t seed, std::size_t n);
    /// Restriction of a global order to a subset keeps relative priorities.
    static TieBreak from_priorities(std::vector<std::uint32_t> priority);

    std::size_t size() const { return priority_.size(); }
    std::span<const std::uint32_t> priority() const { return priority_; }

private:
    std::vector<std::uint32_t> priority_;
};

/// Ranks 1..N of y; equal values are ordered by the tie-break priority.
std::vector<std::size_t> rank_with_tiebreak(std::span<const double> y, const TieBreak& tiebreak);
std::vector<std::size_t> rank_with_tiebreak(std::span<const double> y, const RankScoreSpec& spec);

/// Ranks of y[members[j]] among themselves, using the priorities of the
/// member indices.
std::vector<std::size_t> rank_subset(std::span<const double> y, std::span<const std::size_t> members,
                                     const TieBreak& tiebreak);

/// wilcoxon: phi(r) = r; stephenson-s: phi(r) = C(r - 1, s - 1) (0 for r < s).
double phi(const RankScoreSpec& spec, std::size_t r, std::size_t n);

/// phi(1), ..., phi(n).
std::vector<double> score_table(const RankScoreSpec& spec, std::size_t n);

/// t(z, y) = sum_i z_i phi(r_i(y)).
double rank_score_stat(std::span<const int> z, std::span<const double> y, const RankScoreSpec& spec);
double rank_score_stat(std::span<const int> z, std::span<const double> y, std::span<const double> scores,
                       const TieBreak& tiebreak);

enum class NullMode { exact, monte_carlo };

/// How to build reference distributions.
struct InferenceOptions {
    enum class Mode { automatic, exact, monte_carlo };
    Mode mode = Mode::automatic;
    std::size_t mc_draws = 10000;
    std::uint64_t seed = 0;
    std::size_t exact_cap = 200000;
    unsigned workers = 1;
};

/// Randomization distribution of a statistic, stored as sorted distinct
/// values with multiplicities (exact) or draw counts (Monte Carlo).
class NullDistribution {
public:
    NullDistribution() = default;

    /// Aggregates unit-weight samples (all assignments, or all draws).
    static NullDistribution from_samples(NullMode mode, std::vector<double> samples);
    /// Exact distribution from (value, weight) pairs; weights need not be normalized.
    static NullDistribution from_weighted(std::vector<std::pair<double, double>> atoms);

    NullMode mode() const { return mode_; }
    double total() const { return total_; }
    const std::vector<double>& values() const { return values_; }
    const std::vector<double>& counts() const { return counts_; }

    /// Weight of values >= t (with a relative tolerance of 1e-9 for
    /// floating-point sums).
    double weight_at_least(double t) const;

    bool operator==(const NullDistribution& other) const = default;

private:
    NullMode mode_ = NullMode::exact;
    std::vector<double> values_;
    std::vector<double> counts_;
    std::vector<double> suffix_;
    double total_ = 0.0;
};

/// Number of assignments C(n, k) as a double.
double assignment_count(std::size_t n, std::size_t k);

/// Resolves `automatic` against the exact cap.
NullMode resolve_mode(const InferenceOptions& options, double assignments);

/// Invokes visit(treated_indices) for every size-k subset of {0..n-1}.
void for_each_assignment(std::size_t n, std::size_t k,
                         const std::function<void(std::span<const std::size_t>)>& visit);

/// Distribution of stat(A) over uniform size-n_treated assignments A.
NullDistribution randomization_distribution(
    std::size_t n, std::size_t n_treated,
    const std::function<double(std::span<const std::size_t>)>& stat, const InferenceOptions& options);

/// Distribution of the rank-score statistic. Rank-score statistics are
/// distribution free, so only the score multiset and N_1 matter.
NullDistribution score_null_distribution(std::span<const double> scores, std::size_t n_treated,
                                         const InferenceOptions& options);

/// Null distribution of t(A, y_ref) for a reference outcome vector.
NullDistribution null_distribution(std::size_t n, std::size_t n_treated, std::span<const double> y_ref,
                                   const RankScoreSpec& spec, const InferenceOptions& options);

/// Exact: #{t* >= t}/total. Monte Carlo: (1 + #{t* >= t}) / (1 + M).
double tail_probability(const NullDistribution& dist, double t_obs);

enum class FrtStatistic { rank_score, difference_in_means, studentized_t };

struct FrtConfig {
    FrtStatistic statistic = FrtStatistic::difference_in_means;
    RankScoreSpec rank{};
};

double difference_in_means(std::span<const int> z, std::span<const double> y);
/// (mean_1 - mean_0) / sqrt(s_1^2/N_1 + s_0^2/N_0).
double studentized_t(std::span<const int> z, std::span<const double> y);

/// FRT p-value for the sharp null tau = delta: impute Y(0) = Y - Z o delta
/// and compare t(Z, Y(0)) against t(A, Y(0)).
double frt_sharp(const OutcomeTable& table, std::span<const double> delta, const FrtConfig& config,
                 const InferenceOptions& options);

enum class SateMethod { normal_approx, studentized_frt };

struct SateResult {
    OneSidedInterval interval;
    double estimate = 0.0;
    double std_error = 0.0;
    std::optional<std::string> warning;
};

/// One-sided lower confidence limit for the sample average treatment effect.
SateResult sate_lower_limit(const OutcomeTable& table, double alpha, SateMethod method,
                            const InferenceOptions& options);

}  // namespace itequant
