#include "itequant/rankstat.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "itequant/error.hpp"
#include "itequant/parallel.hpp"
#include "itequant/random.hpp"

namespace itequant {

namespace {

constexpr std::uint64_t kTieBreakStream = 0x7469656272656b31ULL;  // "tiebrek1"

double tolerance_for(double t) { return 1e-9 * std::max(1.0, std::abs(t)); }

std::vector<std::size_t> treated_indices(std::span<const int> z) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] == 1) out.push_back(i);
    }
    return out;
}

struct GroupMoments {
    double mean1 = 0, mean0 = 0, var1 = 0, var0 = 0;
    std::size_t n1 = 0, n0 = 0;
};

GroupMoments moments(std::span<const double> y, std::span<const std::size_t> treated) {
    std::vector<char> mark(y.size(), 0);
    for (auto i : treated) mark[i] = 1;
    GroupMoments m;
    double s1 = 0, s0 = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (mark[i]) {
            s1 += y[i];
            ++m.n1;
        } else {
            s0 += y[i];
            ++m.n0;
        }
    }
    m.mean1 = m.n1 ? s1 / static_cast<double>(m.n1) : 0.0;
    m.mean0 = m.n0 ? s0 / static_cast<double>(m.n0) : 0.0;
    double q1 = 0, q0 = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (mark[i]) {
            q1 += (y[i] - m.mean1) * (y[i] - m.mean1);
        } else {
            q0 += (y[i] - m.mean0) * (y[i] - m.mean0);
        }
    }
    m.var1 = m.n1 > 1 ? q1 / static_cast<double>(m.n1 - 1) : 0.0;
    m.var0 = m.n0 > 1 ? q0 / static_cast<double>(m.n0 - 1) : 0.0;
    return m;
}

double studentize(double diff, double se) {
    if (se > 0.0) return diff / se;
    if (diff > 0.0) return std::numeric_limits<double>::infinity();
    if (diff < 0.0) return -std::numeric_limits<double>::infinity();
    return 0.0;
}

double studentized_from_indices(std::span<const double> y, std::span<const std::size_t> treated) {
    const auto m = moments(y, treated);
    const double se = std::sqrt((m.n1 ? m.var1 / static_cast<double>(m.n1) : 0.0) +
                                (m.n0 ? m.var0 / static_cast<double>(m.n0) : 0.0));
    return studentize(m.mean1 - m.mean0, se);
}

double diff_from_indices(std::span<const double> y, std::span<const std::size_t> treated) {
    const auto m = moments(y, treated);
    return m.mean1 - m.mean0;
}

// Assignments used by the studentized inversion: all of them, or M draws.
struct AssignmentSet {
    NullMode mode = NullMode::exact;
    std::vector<std::vector<std::size_t>> treated;
};

AssignmentSet build_assignments(std::size_t n, std::size_t k, const InferenceOptions& options) {
    AssignmentSet set;
    set.mode = resolve_mode(options, assignment_count(n, k));
    if (set.mode == NullMode::exact) {
        for_each_assignment(n, k, [&](std::span<const std::size_t> a) { set.treated.emplace_back(a.begin(), a.end()); });
        return set;
    }
    set.treated.resize(options.mc_draws);
    parallel_for(options.mc_draws, options.workers, [&](std::size_t m) {
        CounterRng rng(options.seed, m);
        std::vector<std::size_t> scratch(n);
        sample_subset(rng, scratch, k);
        std::vector<std::size_t> a(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(a.begin(), a.end());
        set.treated[m] = std::move(a);
    });
    return set;
}

}  // namespace

std::string RankScoreSpec::tag() const {
    return kind == ScoreKind::wilcoxon ? std::string("W") : "S" + std::to_string(s);
}

RankScoreSpec wilcoxon_spec(std::uint64_t tiebreak_seed) {
    return {ScoreKind::wilcoxon, 1, tiebreak_seed};
}

RankScoreSpec stephenson_spec(int s, std::uint64_t tiebreak_seed) {
    if (s < 1) throw ValidationError("Stephenson s must be >= 1");
    return {ScoreKind::stephenson, s, tiebreak_seed};
}

RankScoreSpec parse_score_spec(const std::string& text, std::uint64_t tiebreak_seed) {
    std::string t;
    for (char ch : text) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    if (t == "w" || t == "wilcoxon") return wilcoxon_spec(tiebreak_seed);
    std::string digits;
    if (t.rfind("stephenson", 0) == 0) {
        digits = t.substr(10);
    } else if (t.rfind("s", 0) == 0) {
        digits = t.substr(1);
    }
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
        return stephenson_spec(std::stoi(digits), tiebreak_seed);
    }
    throw ValidationError("unknown rank score '" + text + "' (expected W or S<s>)");
}

TieBreak TieBreak::identity(std::size_t n) {
    TieBreak tb;
    tb.priority_.resize(n);
    std::iota(tb.priority_.begin(), tb.priority_.end(), 0u);
    return tb;
}

TieBreak TieBreak::from_seed(std::uint64_t seed, std::size_t n) {
    CounterRng rng(seed, kTieBreakStream);
    std::vector<std::size_t> order(n);
    sample_subset(rng, order, n);
    TieBreak tb;
    tb.priority_.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) tb.priority_[order[pos]] = static_cast<std::uint32_t>(pos);
    return tb;
}

TieBreak TieBreak::from_priorities(std::vector<std::uint32_t> priority) {
    TieBreak tb;
    tb.priority_ = std::move(priority);
    return tb;
}

std::vector<std::size_t> rank_subset(std::span<const double> y, std::span<const std::size_t> members,
                                     const TieBreak& tiebreak) {
    const auto prio = tiebreak.priority();
    std::vector<std::size_t> order(members.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto ia = members[a], ib = members[b];
        if (y[ia] != y[ib]) return y[ia] < y[ib];
        return prio[ia] < prio[ib];
    });
    std::vector<std::size_t> ranks(members.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[order[pos]] = pos + 1;
    return ranks;
}

std::vector<std::size_t> rank_with_tiebreak(std::span<const double> y, const TieBreak& tiebreak) {
    if (tiebreak.size() != y.size()) throw ValidationError("tie-break order length differs from outcomes");
    std::vector<std::size_t> all(y.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return rank_subset(y, all, tiebreak);
}

std::vector<std::size_t> rank_with_tiebreak(std::span<const double> y, const RankScoreSpec& spec) {
    return rank_with_tiebreak(y, TieBreak::from_seed(spec.tiebreak_seed, y.size()));
}

double phi(const RankScoreSpec& spec, std::size_t r, std::size_t n) {
    if (r < 1 || r > n) throw ValidationError("rank out of range for score function");
    if (spec.kind == ScoreKind::wilcoxon) return static_cast<double>(r);
    if (spec.s < 1) throw ValidationError("Stephenson s must be >= 1");
    const auto s = static_cast<std::size_t>(spec.s);
    if (r < s) return 0.0;
    // C(r - 1, s - 1); each partial product is itself a binomial coefficient.
    double c = 1.0;
    for (std::size_t i = 1; i < s; ++i) c = c * static_cast<double>(r - s + i) / static_cast<double>(i);
    return c;
}

std::vector<double> score_table(const RankScoreSpec& spec, std::size_t n) {
    std::vector<double> scores(n);
    for (std::size_t r = 1; r <= n; ++r) scores[r - 1] = phi(spec, r, n);
    return scores;
}

double rank_score_stat(std::span<const int> z, std::span<const double> y, std::span<const double> scores,
                       const TieBreak& tiebreak) {
    if (z.size() != y.size()) throw ValidationError("assignment and outcome lengths differ");
    const auto ranks = rank_with_tiebreak(y, tiebreak);
    double t = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] == 1) t += scores[ranks[i] - 1];
    }
    return t;
}

double rank_score_stat(std::span<const int> z, std::span<const double> y, const RankScoreSpec& spec) {
    if (z.size() != y.size()) throw ValidationError("assignment and outcome lengths differ");
    const auto scores = score_table(spec, y.size());
    return rank_score_stat(z, y, scores, TieBreak::from_seed(spec.tiebreak_seed, y.size()));
}

NullDistribution NullDistribution::from_samples(NullMode mode, std::vector<double> samples) {
    std::vector<std::pair<double, double>> atoms;
    atoms.reserve(samples.size());
    for (double v : samples) atoms.emplace_back(v, 1.0);
    auto dist = from_weighted(std::move(atoms));
    dist.mode_ = mode;
    return dist;
}

NullDistribution NullDistribution::from_weighted(std::vector<std::pair<double, double>> atoms) {
    std::sort(atoms.begin(), atoms.end());
    NullDistribution dist;
    for (const auto& [v, w] : atoms) {
        if (!dist.values_.empty() && dist.values_.back() == v) {
            dist.counts_.back() += w;
        } else {
            dist.values_.push_back(v);
            dist.counts_.push_back(w);
        }
    }
    dist.suffix_.assign(dist.values_.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = dist.values_.size(); i-- > 0;) {
        acc += dist.counts_[i];
        dist.suffix_[i] = acc;
    }
    dist.total_ = acc;
    return dist;
}

double NullDistribution::weight_at_least(double t) const {
    const auto it = std::lower_bound(values_.begin(), values_.end(), t - tolerance_for(t));
    if (it == values_.end()) return 0.0;
    return suffix_[static_cast<std::size_t>(it - values_.begin())];
}

double assignment_count(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(c);
}

NullMode resolve_mode(const InferenceOptions& options, double assignments) {
    switch (options.mode) {
        case InferenceOptions::Mode::exact:
            if (assignments > static_cast<double>(options.exact_cap)) {
                throw ValidationError("exact enumeration cap exceeded: " + std::to_string(assignments) +
                                      " assignments > cap " + std::to_string(options.exact_cap));
            }
            return NullMode::exact;
        case InferenceOptions::Mode::monte_carlo:
            return NullMode::monte_carlo;
        case InferenceOptions::Mode::automatic:
            break;
    }
    return assignments <= static_cast<double>(options.exact_cap) ? NullMode::exact : NullMode::monte_carlo;
}

void for_each_assignment(std::size_t n, std::size_t k,
                         const std::function<void(std::span<const std::size_t>)>& visit) {
    if (k > n) return;
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (;;) {
        visit(idx);
        // Advance to the next combination in lexicographic order.
        std::size_t pos = k;
        while (pos > 0 && idx[pos - 1] == n - k + pos - 1) --pos;
        if (pos == 0) return;
        ++idx[pos - 1];
        for (std::size_t j = pos; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

NullDistribution randomization_distribution(
    std::size_t n, std::size_t n_treated,
    const std::function<double(std::span<const std::size_t>)>& stat, const InferenceOptions& options) {
    if (n_treated > n) throw ValidationError("more treated units than participants");
    const auto mode = resolve_mode(options, assignment_count(n, n_treated));
    std::vector<double> samples;
    if (mode == NullMode::exact) {
        for_each_assignment(n, n_treated, [&](std::span<const std::size_t> a) { samples.push_back(stat(a)); });
        return NullDistribution::from_samples(NullMode::exact, std::move(samples));
    }
    if (options.mc_draws == 0) throw ValidationError("mc_draws must be positive");
    samples.resize(options.mc_draws);
    parallel_for(options.mc_draws, options.workers, [&](std::size_t m) {
        CounterRng rng(options.seed, m);
        std::vector<std::size_t> scratch(n);
        sample_subset(rng, scratch, n_treated);
        std::sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(n_treated));
        samples[m] = stat(std::span<const std::size_t>(scratch.data(), n_treated));
    });
    return NullDistribution::from_samples(NullMode::monte_carlo, std::move(samples));
}

NullDistribution score_null_distribution(std::span<const double> scores, std::size_t n_treated,
                                         const InferenceOptions& options) {
    const std::vector<double> s(scores.begin(), scores.end());
    return randomization_distribution(
        s.size(), n_treated,
        [&s](std::span<const std::size_t> a) {
            double t = 0.0;
            for (auto i : a) t += s[i];
            return t;
        },
        options);
}

NullDistribution null_distribution(std::size_t n, std::size_t n_treated, std::span<const double> y_ref,
                                   const RankScoreSpec& spec, const InferenceOptions& options) {
    if (y_ref.size() != n) throw ValidationError("reference vector length differs from N");
    const auto ranks = rank_with_tiebreak(y_ref, spec);
    const auto table = score_table(spec, n);
    std::vector<double> unit_scores(n);
    for (std::size_t i = 0; i < n; ++i) unit_scores[i] = table[ranks[i] - 1];
    return score_null_distribution(unit_scores, n_treated, options);
}

double tail_probability(const NullDistribution& dist, double t_obs) {
    const double hits = dist.weight_at_least(t_obs);
    if (dist.mode() == NullMode::exact) return std::clamp(hits / dist.total(), 0.0, 1.0);
    return (1.0 + hits) / (1.0 + dist.total());
}

double difference_in_means(std::span<const int> z, std::span<const double> y) {
    if (z.size() != y.size()) throw ValidationError("assignment and outcome lengths differ");
    const auto t = treated_indices(z);
    if (t.empty() || t.size() == z.size()) throw ValidationError("difference in means needs both arms");
    return diff_from_indices(y, t);
}

double studentized_t(std::span<const int> z, std::span<const double> y) {
    if (z.size() != y.size()) throw ValidationError("assignment and outcome lengths differ");
    return studentized_from_indices(y, treated_indices(z));
}

double frt_sharp(const OutcomeTable& table, std::span<const double> delta, const FrtConfig& config,
                 const InferenceOptions& options) {
    validate_table(table, TableMode::cre);
    const auto n = table.size();
    if (delta.size() != n) throw ValidationError("delta length differs from N");
    const auto& z = table.assignment();
    const auto& y = table.outcomes();
    std::vector<double> y0(n);
    for (std::size_t i = 0; i < n; ++i) y0[i] = y[i] - static_cast<double>(z[i]) * delta[i];
    const auto observed = treated_indices(z);

    if (config.statistic == FrtStatistic::rank_score) {
        const auto tb = TieBreak::from_seed(config.rank.tiebreak_seed, n);
        const auto ranks = rank_with_tiebreak(y0, tb);
        const auto table_scores = score_table(config.rank, n);
        std::vector<double> unit_scores(n);
        for (std::size_t i = 0; i < n; ++i) unit_scores[i] = table_scores[ranks[i] - 1];
        double t_obs = 0.0;
        for (auto i : observed) t_obs += unit_scores[i];
        return tail_probability(score_null_distribution(unit_scores, table.treated_count(), options), t_obs);
    }

    std::function<double(std::span<const std::size_t>)> stat;
    if (config.statistic == FrtStatistic::difference_in_means) {
        stat = [&y0](std::span<const std::size_t> a) { return diff_from_indices(y0, a); };
    } else {
        stat = [&y0](std::span<const std::size_t> a) { return studentized_from_indices(y0, a); };
    }
    const double t_obs = stat(observed);
    return tail_probability(randomization_distribution(n, table.treated_count(), stat, options), t_obs);
}

SateResult sate_lower_limit(const OutcomeTable& table, double alpha, SateMethod method,
                            const InferenceOptions& options) {
    validate_table(table, TableMode::cre);
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    if (table.treated_count() < 2 || table.control_count() < 2) {
        throw ValidationError("SATE inference needs at least 2 units per arm");
    }
    const auto& y = table.outcomes();
    const auto observed = treated_indices(table.assignment());
    const auto m = moments(y, observed);

    SateResult out;
    out.estimate = m.mean1 - m.mean0;
    out.std_error = std::sqrt(m.var1 / static_cast<double>(m.n1) + m.var0 / static_cast<double>(m.n0));
    out.interval.level = 1.0 - alpha;
    if (!(out.std_error > 0.0)) {
        out.warning = "degenerate variance: both arms constant; using half-width 0";
        out.interval.lower = out.estimate;
        return out;
    }

    if (method == SateMethod::normal_approx) {
        const double z = boost::math::quantile(boost::math::normal(), 1.0 - alpha);
        out.interval.lower = out.estimate - z * out.std_error;
        return out;
    }

    // Invert the studentized FRT over constant shifts, sharing one set of
    // assignments across candidate shifts.
    const auto n = table.size();
    const auto& z = table.assignment();
    const auto assignments = build_assignments(n, table.treated_count(), options);
    const auto pvalue = [&](double c) {
        std::vector<double> y0(n);
        for (std::size_t i = 0; i < n; ++i) y0[i] = y[i] - c * static_cast<double>(z[i]);
        const double t_obs = studentized_from_indices(y0, observed);
        const double tol = tolerance_for(t_obs);
        double hits = 0.0;
        for (const auto& a : assignments.treated) {
            if (studentized_from_indices(y0, a) >= t_obs - tol) hits += 1.0;
        }
        const auto total = static_cast<double>(assignments.treated.size());
        return assignments.mode == NullMode::exact ? hits / total : (1.0 + hits) / (1.0 + total);
    };

    const double scale = out.std_error;
    double lo = out.estimate - 10.0 * scale;
    double hi = out.estimate + 10.0 * scale;
    for (int i = 0; i < 60 && pvalue(lo) > alpha; ++i) lo -= (hi - lo);
    if (pvalue(lo) > alpha) {
        out.interval.lower = kNegInf;
        return out;
    }
    for (int i = 0; i < 60 && pvalue(hi) <= alpha; ++i) hi += (hi - lo);
    const double tol = 1e-10 * (1.0 + std::abs(out.estimate) + scale);
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (pvalue(mid) > alpha) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    out.interval.lower = hi;
    return out;
}

}  // namespace itequant
