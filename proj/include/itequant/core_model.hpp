#pragma once

// Shared data model: observed trials, science tables, quantile hypotheses
// and the confidence statements produced by every inference method.

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace itequant {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct OutcomeRow {
    std::string participant_id;
    int arm = 0;  // 1 = treated, 0 = control
    std::optional<std::string> stratum;
    double outcome = 0.0;  // analysis scale
};

/// Index sets for the strata of a table, in order of first appearance.
struct StratumLayout {
    std::vector<std::string> labels;
    std::vector<std::vector<std::size_t>> members;
    std::vector<std::size_t> stratum_of;  // per row

    std::size_t size() const { return labels.size(); }
};

/// Immutable table of observed outcomes for a two-arm trial.
class OutcomeTable {
public:
    OutcomeTable() = default;
    explicit OutcomeTable(std::vector<OutcomeRow> rows, std::optional<double> lod = std::nullopt);

    /// Builds rows with ids "1".."N" from assignment and outcome columns.
    static OutcomeTable from_arrays(const std::vector<int>& z, const std::vector<double>& y,
                                    const std::vector<std::string>& strata = {},
                                    std::optional<double> lod = std::nullopt);

    const std::vector<OutcomeRow>& rows() const { return rows_; }
    const std::optional<double>& lod() const { return lod_; }

    std::size_t size() const { return rows_.size(); }
    std::size_t treated_count() const { return treated_; }
    std::size_t control_count() const { return rows_.size() - treated_; }

    const std::vector<int>& assignment() const { return z_; }
    const std::vector<double>& outcomes() const { return y_; }

    bool has_strata() const;
    StratumLayout strata() const;

    /// Sorted outcomes of treated rows, ascending.
    std::vector<double> treated_outcomes_sorted() const;

    /// Swap arm labels and negate outcomes. ITEs are unchanged by this map.
    OutcomeTable flipped() const;

    OutcomeTable with_outcomes(std::vector<double> y) const;

private:
    std::vector<OutcomeRow> rows_;
    std::optional<double> lod_;
    std::vector<int> z_;
    std::vector<double> y_;
    std::size_t treated_ = 0;
};

enum class TableMode { cre, stratified, placebo };

/// Enforces the table invariants for `mode`; throws ValidationError with a
/// distinct message per failure.
const OutcomeTable& validate_table(const OutcomeTable& table, TableMode mode);

/// Full or partial science table. Presence is explicit per entry.
class PotentialOutcomeFrame {
public:
    using Column = std::vector<std::optional<double>>;

    PotentialOutcomeFrame(Column y1, Column y0, Column tau);

    static PotentialOutcomeFrame from_science(const std::vector<double>& y1,
                                              const std::vector<double>& y0);

    std::size_t size() const { return tau_.size(); }
    const Column& y1() const { return y1_; }
    const Column& y0() const { return y0_; }
    const Column& tau() const { return tau_; }

    /// Observed table under assignment z: Y_i = z_i Y_i(1) + (1 - z_i) Y_i(0).
    OutcomeTable observe(const std::vector<int>& z) const;

private:
    Column y1_, y0_, tau_;
};

/// H_{k,c}: tau_(k) <= c, equivalently N(c) <= N - k. k = 0 is vacuous.
struct QuantileHypothesis {
    int k = 0;
    double c = 0.0;
};

/// Empirical distribution of a complete set of ITEs.
class IteDistribution {
public:
    explicit IteDistribution(std::vector<double> taus);

    std::size_t size() const { return sorted_.size(); }
    const std::vector<double>& sorted() const { return sorted_; }

    /// tau_(k) with 1-based k; tau_(0) = -inf.
    double order_stat(std::size_t k) const;
    /// N(c) = #{i : tau_i > c}.
    std::size_t exceedances(double c) const;
    /// F(c) = 1 - N(c)/N.
    double cdf(double c) const;
    /// F^{-1}(beta) = tau_(ceil(N beta)) for beta in (0, 1].
    double quantile(double beta) const;

    bool satisfies(const QuantileHypothesis& h) const;

private:
    std::vector<double> sorted_;
};

IteDistribution empirical_ite_distribution(const PotentialOutcomeFrame& frame);

/// ceil(N * beta) with a small guard against representation error.
std::size_t rank_from_fraction(std::size_t n, double beta);

enum class CoverageKind { pointwise, simultaneous };

/// [lower, inf). lower = -inf means non-informative.
struct OneSidedInterval {
    double lower = kNegInf;
    double level = 0.95;
    CoverageKind kind = CoverageKind::pointwise;

    bool informative() const { return lower != kNegInf; }
};

/// Lower confidence limits for a set of ITE ranks.
struct ITEProfileCI {
    std::vector<std::size_t> quantile_ranks;
    std::vector<double> lower_limits;
    double level = 0.95;
    bool simultaneous = false;
    std::string method_tag;
};

/// Replaces each entry by the running maximum from the front.
void monotonize(std::vector<double>& limits);

}  // namespace itequant
