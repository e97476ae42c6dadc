#include "itequant/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "itequant/error.hpp"

namespace itequant {

OutcomeTable::OutcomeTable(std::vector<OutcomeRow> rows, std::optional<double> lod)
    : rows_(std::move(rows)), lod_(lod) {
    z_.reserve(rows_.size());
    y_.reserve(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& row = rows_[i];
        if (row.arm != 0 && row.arm != 1) {
            throw ValidationError("row " + std::to_string(i + 1) + ": arm must be 0 or 1");
        }
        z_.push_back(row.arm);
        y_.push_back(row.outcome);
        treated_ += static_cast<std::size_t>(row.arm);
    }
}

OutcomeTable OutcomeTable::from_arrays(const std::vector<int>& z, const std::vector<double>& y,
                                       const std::vector<std::string>& strata,
                                       std::optional<double> lod) {
    if (z.size() != y.size() || (!strata.empty() && strata.size() != y.size())) {
        throw ValidationError("assignment, outcome and stratum columns differ in length");
    }
    std::vector<OutcomeRow> rows(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        rows[i].participant_id = std::to_string(i + 1);
        rows[i].arm = z[i];
        rows[i].outcome = y[i];
        if (!strata.empty()) rows[i].stratum = strata[i];
    }
    return OutcomeTable(std::move(rows), lod);
}

bool OutcomeTable::has_strata() const {
    return std::any_of(rows_.begin(), rows_.end(), [](const auto& r) { return r.stratum.has_value(); });
}

StratumLayout OutcomeTable::strata() const {
    StratumLayout layout;
    layout.stratum_of.resize(rows_.size());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const std::string label = rows_[i].stratum.value_or("");
        auto [it, inserted] = index.try_emplace(label, layout.labels.size());
        if (inserted) {
            layout.labels.push_back(label);
            layout.members.emplace_back();
        }
        layout.members[it->second].push_back(i);
        layout.stratum_of[i] = it->second;
    }
    return layout;
}

std::vector<double> OutcomeTable::treated_outcomes_sorted() const {
    std::vector<double> out;
    out.reserve(treated_);
    for (std::size_t i = 0; i < y_.size(); ++i) {
        if (z_[i] == 1) out.push_back(y_[i]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

OutcomeTable OutcomeTable::flipped() const {
    auto rows = rows_;
    for (auto& r : rows) {
        r.arm = 1 - r.arm;
        r.outcome = -r.outcome;
    }
    return OutcomeTable(std::move(rows), lod_ ? std::optional<double>(-*lod_) : std::nullopt);
}

OutcomeTable OutcomeTable::with_outcomes(std::vector<double> y) const {
    if (y.size() != rows_.size()) throw ValidationError("outcome column length mismatch");
    auto rows = rows_;
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].outcome = y[i];
    return OutcomeTable(std::move(rows), lod_);
}

const OutcomeTable& validate_table(const OutcomeTable& table, TableMode mode) {
    const auto& rows = table.rows();
    if (rows.size() < 2) throw ValidationError("table needs at least 2 rows");
    if (table.treated_count() == 0) throw ValidationError("empty treated arm");
    if (mode == TableMode::stratified && table.control_count() == 0) {
        throw ValidationError("empty control arm");
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!std::isfinite(rows[i].outcome)) {
            throw ValidationError("non-finite outcome at row " + std::to_string(i + 1));
        }
    }
    const auto labeled = static_cast<std::size_t>(std::count_if(
        rows.begin(), rows.end(), [](const auto& r) { return r.stratum.has_value(); }));
    if (labeled != 0 && labeled != rows.size()) throw ValidationError("mixed stratum labeling");

    if (mode == TableMode::stratified) {
        if (labeled == 0) throw ValidationError("stratified mode requires stratum labels");
        const auto layout = table.strata();
        const auto& z = table.assignment();
        for (std::size_t s = 0; s < layout.size(); ++s) {
            std::size_t treated = 0;
            for (auto i : layout.members[s]) treated += static_cast<std::size_t>(z[i]);
            if (treated == 0) throw ValidationError("stratum without treated units: " + layout.labels[s]);
            if (treated == layout.members[s].size()) {
                throw ValidationError("stratum without controls: " + layout.labels[s]);
            }
        }
    }
    if (mode == TableMode::placebo) {
        if (!table.lod()) throw ValidationError("placebo mode requires lod");
        if (!std::isfinite(*table.lod())) throw ValidationError("lod must be finite");
    }
    return table;
}

PotentialOutcomeFrame::PotentialOutcomeFrame(Column y1, Column y0, Column tau)
    : y1_(std::move(y1)), y0_(std::move(y0)), tau_(std::move(tau)) {
    if (y1_.size() != y0_.size() || y1_.size() != tau_.size()) {
        throw ValidationError("science table columns differ in length");
    }
    for (std::size_t i = 0; i < tau_.size(); ++i) {
        if (y1_[i] && y0_[i]) {
            const double diff = *y1_[i] - *y0_[i];
            if (tau_[i] && *tau_[i] != diff) {
                throw ValidationError("tau differs from y1 - y0 at unit " + std::to_string(i + 1));
            }
            tau_[i] = diff;
        }
    }
}

PotentialOutcomeFrame PotentialOutcomeFrame::from_science(const std::vector<double>& y1,
                                                          const std::vector<double>& y0) {
    if (y1.size() != y0.size()) throw ValidationError("science table columns differ in length");
    Column a(y1.begin(), y1.end());
    Column b(y0.begin(), y0.end());
    return PotentialOutcomeFrame(std::move(a), std::move(b), Column(y1.size()));
}

OutcomeTable PotentialOutcomeFrame::observe(const std::vector<int>& z) const {
    if (z.size() != size()) throw ValidationError("assignment length differs from science table");
    std::vector<double> y(size());
    for (std::size_t i = 0; i < size(); ++i) {
        const auto& source = z[i] == 1 ? y1_[i] : y0_[i];
        if (!source) throw ValidationError("science table incomplete");
        y[i] = *source;
    }
    return OutcomeTable::from_arrays(z, y);
}

IteDistribution::IteDistribution(std::vector<double> taus) : sorted_(std::move(taus)) {
    std::sort(sorted_.begin(), sorted_.end());
}

double IteDistribution::order_stat(std::size_t k) const {
    if (k == 0) return kNegInf;
    if (k > sorted_.size()) throw ValidationError("rank out of range");
    return sorted_[k - 1];
}

std::size_t IteDistribution::exceedances(double c) const {
    return static_cast<std::size_t>(sorted_.end() - std::upper_bound(sorted_.begin(), sorted_.end(), c));
}

double IteDistribution::cdf(double c) const {
    return 1.0 - static_cast<double>(exceedances(c)) / static_cast<double>(sorted_.size());
}

double IteDistribution::quantile(double beta) const {
    if (!(beta > 0.0 && beta <= 1.0)) throw ValidationError("quantile fraction must lie in (0, 1]");
    return order_stat(rank_from_fraction(sorted_.size(), beta));
}

bool IteDistribution::satisfies(const QuantileHypothesis& h) const {
    if (h.k <= 0) return true;
    return order_stat(static_cast<std::size_t>(h.k)) <= h.c;
}

IteDistribution empirical_ite_distribution(const PotentialOutcomeFrame& frame) {
    std::vector<double> taus;
    taus.reserve(frame.size());
    for (const auto& t : frame.tau()) {
        if (!t) throw ValidationError("science table incomplete");
        taus.push_back(*t);
    }
    return IteDistribution(std::move(taus));
}

std::size_t rank_from_fraction(std::size_t n, double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw ValidationError("quantile fraction must lie in (0, 1]");
    const double scaled = static_cast<double>(n) * beta;
    auto k = static_cast<std::size_t>(std::ceil(scaled - 1e-9 * std::max(1.0, scaled)));
    return std::clamp<std::size_t>(k, 1, n);
}

void monotonize(std::vector<double>& limits) {
    for (std::size_t j = 1; j < limits.size(); ++j) limits[j] = std::max(limits[j], limits[j - 1]);
}

}  // namespace itequant
