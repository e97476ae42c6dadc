// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "itequant/harness.hpp"
#include "itequant/hyperexact.hpp"
#include "itequant/parallel.hpp"
#include "itequant/quantile_cre.hpp"
#include "itequant/rankstat.hpp"
#include "itequant/stratified.hpp"
#include "oracles.hpp"

#ifndef ITEQUANT_CLI_PATH
#error "ITEQUANT_CLI_PATH must name the CLI binary"
#endif

using namespace itequant;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s criterion %d (%s): %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

InferenceOptions exact_options() {
    InferenceOptions o;
    o.mode = InferenceOptions::Mode::exact;
    return o;
}

std::vector<std::uint32_t> priorities_for(const RankScoreSpec& spec, std::size_t n) {
    const auto tb = TieBreak::from_seed(spec.tiebreak_seed, n);
    return {tb.priority().begin(), tb.priority().end()};
}

// ---------------------------------------------------------------------------

void criterion_hypergeometric() {
    const auto start = Clock::now();
    double worst_norm = 0.0, worst_oracle = 0.0;
    std::size_t ordering_violations = 0, cases = 0;
    for (std::int64_t n = 1; n <= 60; ++n) {
        for (std::int64_t draws = 0; draws <= n; ++draws) {
            std::vector<double> prev_tail;
            for (std::int64_t succ = 0; succ <= n; ++succ) {
                const HypergeomParams p{n, succ, draws};
                double total = 0.0;
                for (auto x = p.support_min(); x <= p.support_max(); ++x) total += hyper_pmf(p, x);
                worst_norm = std::max(worst_norm, std::abs(total - 1.0));
                std::vector<double> tail(static_cast<std::size_t>(draws) + 2);
                for (std::int64_t x = 0; x <= draws + 1; ++x) {
                    tail[static_cast<std::size_t>(x)] = hyper_tail(p, x);
                    if ((n + succ + x) % 7 == 0) {
                        worst_oracle = std::max(worst_oracle,
                                                std::abs(tail[static_cast<std::size_t>(x)] -
                                                         oracle::hyper_tail(n, succ, draws, x)));
                    }
                }
                // More successes in the population stochastically enlarge the count.
                if (!prev_tail.empty()) {
                    for (std::size_t x = 0; x < tail.size(); ++x) {
                        if (tail[x] < prev_tail[x] - 1e-12) ++ordering_violations;
                    }
                }
                prev_tail = std::move(tail);
                ++cases;
            }
        }
    }
    const double g = hyper_tail({4, 3, 3}, 3);
    const double secs = seconds_since(start);
    const bool ok = worst_norm <= 1e-12 && worst_oracle <= 1e-12 && ordering_violations == 0 && g == 0.25 &&
                    secs < 5.0;
    report(1, "hypergeometric kernel", ok,
           fmt("%zu parameter sets, max |sum pmf - 1| = %.2e, max |tail - exact| = %.2e, ordering violations %zu, "
               "G_H(3;4,3,3) = %.17g, %.2f s",
               cases, worst_norm, worst_oracle, ordering_violations, g, secs));
}

// ---------------------------------------------------------------------------

void criterion_placebo_equivalence() {
    const auto start = Clock::now();
    std::mt19937_64 gen(2024);
    std::size_t mismatches = 0, checks = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 12)(gen);
        const std::size_t n1 = std::uniform_int_distribution<std::size_t>(1, n - 1)(gen);
        std::vector<int> z(n, 0);
        std::fill(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n1), 1);
        std::shuffle(z.begin(), z.end(), gen);
        std::vector<double> y(n);
        std::normal_distribution<double> normal(0.5, 1.0);
        std::vector<double> treated;
        for (std::size_t i = 0; i < n; ++i) {
            if (z[i] == 1) {
                y[i] = rep % 3 == 0 ? std::round(normal(gen) * 2.0) / 2.0 : normal(gen);
                treated.push_back(y[i]);
            } else {
                y[i] = rep % 4 == 0 ? 0.0 : -std::uniform_real_distribution<double>(0.0, 1.0)(gen);
            }
        }
        const auto table = OutcomeTable::from_arrays(z, y, {}, 0.0);
        std::sort(treated.begin(), treated.end());
        treated.erase(std::unique(treated.begin(), treated.end()), treated.end());
        std::vector<double> probes{treated.front() - 1.0, treated.back() + 1.0};
        for (std::size_t j = 0; j < treated.size(); ++j) {
            probes.push_back(treated[j]);
            if (j + 1 < treated.size()) probes.push_back((treated[j] + treated[j + 1]) / 2.0);
        }
        auto exceed = [&](double c) {
            std::int64_t count = 0;
            for (std::size_t i = 0; i < n; ++i) count += z[i] == 1 && y[i] > c;
            return count;
        };
        const auto N = static_cast<std::int64_t>(n), N1 = static_cast<std::int64_t>(n1);
        for (double alpha : {0.01, 0.05, 0.1}) {
            for (std::size_t k = 1; k <= n; ++k) {
                const double lower = placebo_ci_quantile(table, k, alpha).lower;
                for (double c : probes) {
                    const double p = oracle::hyper_tail(N, N - static_cast<std::int64_t>(k), N1, exceed(c));
                    mismatches += (c >= lower) != (p > alpha);
                    ++checks;
                }
            }
            for (double c : probes) {
                const std::size_t lib = placebo_ci_count(table, c, alpha);
                for (std::int64_t m = 0; m <= N; ++m) {
                    // N(c) <= m is H_{N-m,c}; m = N holds trivially.
                    const double p = m == N ? 1.0 : oracle::hyper_tail(N, m, N1, exceed(c));
                    mismatches += (static_cast<std::size_t>(m) >= lib) != (p > alpha);
                    ++checks;
                }
            }
        }
    }
    const double secs = seconds_since(start);
    report(2, "closed-form placebo limits equal test inversion", mismatches == 0 && secs < 60.0,
           fmt("1000 tables, %zu membership checks, %zu mismatches, %.2f s", checks, mismatches, secs));
}

// ---------------------------------------------------------------------------

struct Science {
    std::vector<double> y1, y0;
    std::vector<std::string> strata;
    std::vector<double> sorted_tau() const {
        std::vector<double> t(y1.size());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = y1[i] - y0[i];
        std::sort(t.begin(), t.end());
        return t;
    }
};

// Randomized assignment, completely or within strata.
std::vector<int> draw_assignment(std::mt19937_64& gen, const Science& sci, std::size_t n1) {
    const std::size_t n = sci.y1.size();
    std::vector<int> z(n, 0);
    if (sci.strata.empty()) {
        std::fill(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n1), 1);
        std::shuffle(z.begin(), z.end(), gen);
        return z;
    }
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[sci.strata[i]].push_back(i);
    for (auto& [label, members] : groups) {
        std::shuffle(members.begin(), members.end(), gen);
        for (std::size_t j = 0; j < members.size() / 2; ++j) z[members[j]] = 1;
    }
    return z;
}

OutcomeTable observe(const Science& sci, const std::vector<int>& z, std::optional<double> lod = std::nullopt) {
    std::vector<double> y(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) y[i] = z[i] ? sci.y1[i] : sci.y0[i];
    return OutcomeTable::from_arrays(z, y, sci.strata, lod);
}

struct Suite {
    std::string name;
    std::size_t rejections = 0;
    std::size_t reps = 0;
    double rate() const { return static_cast<double>(rejections) / static_cast<double>(reps); }
};

// `reject(table, k, tau_k)` returns true when the test (or the confidence
// limit) excludes the true tau_(k).
Suite validity_suite(const std::string& name, const Science& sci, std::size_t n1, const std::vector<std::size_t>& ks,
                     std::size_t reps, std::optional<double> lod,
                     const std::function<bool(const OutcomeTable&, std::size_t, double)>& reject) {
    const auto taus = sci.sorted_tau();
    Suite out{name, 0, 0};
    for (auto k : ks) {
        std::vector<char> hit(reps, 0);
        parallel_for(reps, 0, [&](std::size_t r) {
            std::mt19937_64 gen(0x5eed0000ULL + r * 7919 + k);
            const auto z = draw_assignment(gen, sci, n1);
            hit[r] = reject(observe(sci, z, lod), k, taus[k - 1]) ? 1 : 0;
        });
        Suite s{name, static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1)), reps};
        if (out.reps == 0 || s.rate() > out.rate()) out = s;
    }
    return out;
}

void criterion_validity() {
    const auto start = Clock::now();
    const double alpha = 0.05;
    const std::size_t reps = 20000;
    std::mt19937_64 gen(77);
    std::normal_distribution<double> normal;

    // Heterogeneous effects: a block tied at zero, a spread, and a few large ones.
    auto make_science = [&](std::size_t n, bool placebo) {
        Science s;
        for (std::size_t i = 0; i < n; ++i) {
            const double y0 = placebo ? -std::abs(normal(gen)) * 0.3 : normal(gen);
            double tau = i < n / 3 ? 0.0 : (i < 2 * n / 3 ? normal(gen) * 0.5 + 0.3 : 1.5 + std::abs(normal(gen)));
            s.y0.push_back(y0);
            s.y1.push_back(y0 + tau);
        }
        return s;
    };

    // Least favourable: k units with effect exactly c = 0 and the rest large,
    // so H_{k,0} holds with no slack.
    auto tight_science = [&](std::size_t n, std::size_t k, bool placebo) {
        Science s;
        for (std::size_t i = 0; i < n; ++i) {
            const double y0 = placebo ? -std::abs(normal(gen)) * 0.3 : normal(gen);
            s.y0.push_back(y0);
            s.y1.push_back(y0 + (i < k ? 0.0 : 4.0 + normal(gen)));
        }
        return s;
    };

    std::vector<Suite> suites;
    auto worst_of = [&](const std::string& name, std::vector<Suite> parts) {
        Suite out = parts.front();
        for (const auto& s : parts) {
            if (s.rate() > out.rate()) out = s;
        }
        out.name = name;
        suites.push_back(out);
    };
    using Reject = std::function<bool(const OutcomeTable&, std::size_t, double)>;
    // Each method runs on a heterogeneous table and on a tight table per rank.
    auto run = [&](const std::string& name, std::size_t n, std::size_t n1, std::vector<std::size_t> ks,
                   bool placebo, bool stratified, const Reject& reject) {
        auto with_strata = [&](Science s) {
            if (stratified) {
                for (std::size_t i = 0; i < n; ++i) s.strata.push_back("s" + std::to_string(i % 3));
            }
            return s;
        };
        const std::optional<double> lod = placebo ? std::optional<double>(0.0) : std::nullopt;
        std::vector<Suite> parts{
            validity_suite(name, with_strata(make_science(n, placebo)), n1, ks, reps, lod, reject)};
        // k = n makes the tight table a constant zero effect: the sharp null.
        ks.push_back(n);
        for (auto k : ks) {
            parts.push_back(
                validity_suite(name, with_strata(tight_science(n, k, placebo)), n1, {k}, reps, lod, reject));
        }
        worst_of(name, parts);
    };

    run("placebo", 20, 10, {10, 16}, true, false, [&](const OutcomeTable& t, std::size_t k, double c) {
        return placebo_pvalue(t, {static_cast<int>(k), c}) <= alpha;
    });
    const auto s2 = stephenson_spec(2);
    run("m1", 14, 7, {7, 12}, false, false, [&](const OutcomeTable& t, std::size_t k, double c) {
        return pvalue_quantile_m1(t, {static_cast<int>(k), c}, s2, exact_options()) <= alpha;
    });
    const auto m2 = parse_method("M2-S2-S6");
    run("m2", 14, 7, {7, 12}, false, false, [&](const OutcomeTable& t, std::size_t k, double c) {
        // Pooled limits are at level 1 - 2 * (alpha / 2).
        return m2_profile(t, {k}, alpha / 2.0, m2, exact_options()).lower_limits[0] > c;
    });
    const auto m3 = parse_method("M3-S2-S6");
    run("m3", 14, 7, {7, 12}, false, false, [&](const OutcomeTable& t, std::size_t k, double c) {
        return m3_profile(t, {k}, alpha, m3, exact_options(), false).lower_limits[0] > c;
    });
    const std::vector<RankScoreSpec> wil{wilcoxon_spec()};
    run("stratified", 18, 0, {9, 15}, false, true, [&](const OutcomeTable& t, std::size_t k, double c) {
        return pvalue_quantile_stratified(t, {static_cast<int>(k), c}, wil, KnapsackSolver::dp, exact_options()) <=
               alpha;
    });

    const double bound = alpha + 3.0 * std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(reps));
    bool ok = true;
    std::string detail;
    for (const auto& s : suites) {
        ok = ok && s.rate() <= bound;
        detail += fmt("%s %.4f, ", s.name.c_str(), s.rate());
    }
    const double secs = seconds_since(start);
    ok = ok && secs < 600.0;
    report(3, "validity under randomization", ok,
           fmt("worst rejection rate per suite over %zu reps: %sbound %.4f, %.1f s", reps, detail.c_str(), bound,
               secs));
}

// ---------------------------------------------------------------------------

void criterion_worst_case() {
    std::mt19937_64 gen(31337);
    std::size_t mismatches = 0, checks = 0;
    for (int inst = 0; inst < 500; ++inst) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 6)(gen);
        const std::size_t n1 = std::uniform_int_distribution<std::size_t>(1, n - 1)(gen);
        std::vector<int> z(n, 0);
        std::fill(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n1), 1);
        std::shuffle(z.begin(), z.end(), gen);
        std::vector<double> y(n);
        std::normal_distribution<double> normal;
        for (auto& v : y) v = inst % 2 ? std::round(normal(gen) * 2.0) / 2.0 : normal(gen);
        const auto table = OutcomeTable::from_arrays(z, y);
        auto grid = candidate_thresholds(table);
        grid.push_back(grid.front() - 1.0);
        grid.push_back(grid.back() + 1.0);
        const std::size_t k = std::uniform_int_distribution<std::size_t>(1, n)(gen);
        const double c = grid[std::uniform_int_distribution<std::size_t>(0, grid.size() - 1)(gen)];
        for (bool wilcoxon : {true, false}) {
            const auto spec = wilcoxon ? wilcoxon_spec(inst) : stephenson_spec(2, inst);
            const double lib = worst_case_statistic(table, {static_cast<int>(k), c}, spec).statistic;
            const double ref = oracle::worst_case_grid(z, y, priorities_for(spec, n), k, c, wilcoxon, 2);
            mismatches += lib != ref;
            ++checks;
        }
    }
    report(4, "worst-case statistic equals exhaustive delta grid", mismatches == 0,
           fmt("500 instances, %zu comparisons (Wilcoxon and Stephenson s=2), %zu mismatches", checks, mismatches));
}

// ---------------------------------------------------------------------------

struct StrataInstance {
    std::vector<int> z;
    std::vector<double> y;
    std::vector<std::string> labels;
};

StrataInstance random_strata(std::mt19937_64& gen, std::size_t max_strata, std::size_t max_size) {
    StrataInstance out;
    const std::size_t s_count = std::uniform_int_distribution<std::size_t>(1, max_strata)(gen);
    std::normal_distribution<double> normal;
    for (std::size_t s = 0; s < s_count; ++s) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(2, max_size)(gen);
        const std::size_t n1 = std::uniform_int_distribution<std::size_t>(1, n - 1)(gen);
        std::vector<int> z(n, 0);
        std::fill(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n1), 1);
        std::shuffle(z.begin(), z.end(), gen);
        for (std::size_t i = 0; i < n; ++i) {
            out.z.push_back(z[i]);
            out.y.push_back(normal(gen) + (z[i] ? 0.7 : 0.0) + 0.4 * static_cast<double>(s));
            out.labels.push_back("s" + std::to_string(s));
        }
    }
    return out;
}

// Minimum of the stratified statistic over treated effect vectors in H_{k,c}.
double stratified_worst_case_oracle(const StrataInstance& inst, std::size_t k, double c,
                                    const std::vector<std::uint32_t>& prio) {
    std::vector<std::size_t> treated;
    for (std::size_t i = 0; i < inst.z.size(); ++i) {
        if (inst.z[i]) treated.push_back(i);
    }
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < inst.z.size(); ++i) groups[inst.labels[i]].push_back(i);
    const std::size_t budget = inst.z.size() - k;
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << treated.size()); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) > budget) continue;
        std::vector<double> y0 = inst.y;
        for (std::size_t t = 0; t < treated.size(); ++t) {
            y0[treated[t]] = (mask >> t & 1u) ? inst.y[treated[t]] - 1e12 : inst.y[treated[t]] - c;
        }
        double total = 0.0;
        for (const auto& [label, members] : groups) {
            std::vector<int> zs;
            std::vector<double> ys;
            std::vector<std::uint32_t> ps;
            for (auto i : members) {
                zs.push_back(inst.z[i]);
                ys.push_back(y0[i]);
                ps.push_back(prio[i]);
            }
            total += oracle::rank_stat(zs, ys, ps, true, 0);
        }
        best = std::min(best, total);
    }
    return best;
}

void criterion_knapsack() {
    std::mt19937_64 gen(4242);
    const std::vector<RankScoreSpec> wil{wilcoxon_spec()};
    std::size_t dp_checks = 0, dp_mismatches = 0;
    for (int rep = 0; rep < 300; ++rep) {
        const auto inst = random_strata(gen, 3, 4);
        const auto table = OutcomeTable::from_arrays(inst.z, inst.y, inst.labels);
        const auto prio = priorities_for(wil[0], inst.z.size());
        const StratifiedEngine engine(table, wil);
        auto grid = engine.candidates();
        for (std::size_t k = 1; k <= inst.z.size(); ++k) {
            const double c = grid[std::uniform_int_distribution<std::size_t>(0, grid.size() - 1)(gen)];
            const double lib = knapsack_min_stat(table, {static_cast<int>(k), c}, wil, KnapsackSolver::dp).statistic;
            dp_mismatches += lib != stratified_worst_case_oracle(inst, k, c, prio);
            ++dp_checks;
        }
    }
    std::size_t greedy_violations = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const auto inst = random_strata(gen, 8, 8);
        const auto table = OutcomeTable::from_arrays(inst.z, inst.y, inst.labels);
        const auto spec = rep % 2 ? std::vector<RankScoreSpec>{stephenson_spec(3)} : wil;
        const StratifiedEngine engine(table, spec);
        const auto grid = engine.candidates();
        const std::size_t k = std::uniform_int_distribution<std::size_t>(1, inst.z.size())(gen);
        const double c = grid[std::uniform_int_distribution<std::size_t>(0, grid.size() - 1)(gen)];
        const QuantileHypothesis h{static_cast<int>(k), c};
        const double dp = knapsack_min_stat(table, h, spec, KnapsackSolver::dp).statistic;
        const double greedy = knapsack_min_stat(table, h, spec, KnapsackSolver::greedy).statistic;
        greedy_violations += greedy > dp;
    }
    report(5, "knapsack", dp_mismatches == 0 && greedy_violations == 0,
           fmt("dp vs exhaustive search: %zu checks, %zu mismatches; greedy > dp in %zu of 1000 instances",
               dp_checks, dp_mismatches, greedy_violations));
}

// ---------------------------------------------------------------------------

void criterion_distribution_free() {
    std::mt19937_64 gen(8080);
    std::size_t compared = 0, differing = 0;
    for (std::size_t n = 2; n <= 7; ++n) {
        for (std::size_t n1 = 1; n1 < n; ++n1) {
            for (bool wilcoxon : {true, false}) {
                const auto spec = wilcoxon ? wilcoxon_spec() : stephenson_spec(2);
                std::normal_distribution<double> normal;
                std::vector<double> a(n), b(n);
                for (auto& v : a) v = normal(gen);
                for (auto& v : b) v = std::exp(3.0 * normal(gen));
                const auto da = null_distribution(n, n1, a, spec, exact_options());
                const auto db = null_distribution(n, n1, b, spec, exact_options());
                // Independent enumeration of the multiset for the first vector.
                std::map<double, double> counts;
                const auto prio = priorities_for(spec, n);
                oracle::each_assignment(n, n1, [&](const std::vector<int>& z) {
                    counts[oracle::rank_stat(z, a, prio, wilcoxon, 2)] += 1.0;
                });
                std::vector<double> values, weights;
                for (auto [v, w] : counts) {
                    values.push_back(v);
                    weights.push_back(w);
                }
                const bool same = da.values() == db.values() && da.counts() == db.counts() &&
                                  da.values() == values && da.counts() == weights;
                differing += !same;
                ++compared;
            }
        }
    }
    report(6, "distribution-free null", differing == 0,
           fmt("%zu (N, N1, statistic) cases, %zu with differing multisets", compared, differing));
}

// ---------------------------------------------------------------------------

void criterion_sensitivity() {
    std::mt19937_64 gen(606);
    const std::vector<double> gammas{1.0, 1.2, 1.5, 2.5, 3.3};
    std::size_t decreases = 0, identity_failures = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t pairs = std::uniform_int_distribution<std::size_t>(3, 10)(gen);
        std::vector<int> z;
        std::vector<double> y;
        std::vector<std::string> labels;
        std::normal_distribution<double> normal;
        for (std::size_t p = 0; p < pairs; ++p) {
            const int first = std::bernoulli_distribution(0.5)(gen) ? 1 : 0;
            for (int u = 0; u < 2; ++u) {
                const int zi = u == 0 ? first : 1 - first;
                z.push_back(zi);
                y.push_back(normal(gen) + (zi ? 0.8 : 0.0));
                labels.push_back("p" + std::to_string(p));
            }
        }
        const auto table = OutcomeTable::from_arrays(z, y, labels);
        const auto spec = rep % 2 ? wilcoxon_spec() : stephenson_spec(2);
        const StratifiedEngine engine(table, {spec});
        const auto grid = engine.candidates();
        const std::size_t k = std::uniform_int_distribution<std::size_t>(1, z.size())(gen);
        const double c = grid[std::uniform_int_distribution<std::size_t>(0, grid.size() - 1)(gen)];
        const QuantileHypothesis h{static_cast<int>(k), c};
        double prev = -1.0;
        for (double g : gammas) {
            const double p = sensitivity_pvalue_pairs(table, h, g, spec, exact_options());
            decreases += p < prev;
            prev = p;
        }
        const double at_one = sensitivity_pvalue_pairs(table, h, 1.0, spec, exact_options());
        const double randomization =
            pvalue_quantile_stratified(table, h, {spec}, KnapsackSolver::dp, exact_options());
        identity_failures += std::memcmp(&at_one, &randomization, sizeof at_one) != 0;
    }
    report(7, "sensitivity", decreases == 0 && identity_failures == 0,
           fmt("100 pair datasets over gamma {1,1.2,1.5,2.5,3.3}: %zu decreases, %zu gamma=1 mismatches", decreases,
               identity_failures));
}

// ---------------------------------------------------------------------------

void criterion_amplification() {
    const double delta = amplify_gamma(1.5, 2.5);
    report(8, "amplification", std::abs(delta - 2.75) <= 1e-9, fmt("gamma 1.5 at lambda 2.5 gives %.12g", delta));
}

// ---------------------------------------------------------------------------

std::vector<double> skewed_pool(std::mt19937_64& gen, std::size_t size, bool treated) {
    std::vector<double> pool(size);
    std::normal_distribution<double> normal;
    std::exponential_distribution<double> expo(1.5);
    for (auto& v : pool) v = treated ? 1.0 + expo(gen) + 0.2 * normal(gen) : 0.3 * normal(gen);
    return pool;
}

void criterion_simulation() {
    const auto start = Clock::now();
    SimulationSpec noise;
    noise.pool1 = {0.0};
    noise.pool0 = {0.0};
    noise.n1 = 50000;
    noise.n0 = 50000;
    noise.seed = 123;
    const auto draw = run_dgp(noise, 0);
    double sum = 0.0, sq = 0.0;
    for (const auto& v : draw.science.y1()) {
        sum += *v;
        sq += *v * *v;
    }
    const double m = static_cast<double>(draw.science.size());
    const double sd = std::sqrt((sq - sum * sum / m) / (m - 1.0));
    const bool sd_ok = std::abs(sd / 0.15 - 1.0) < 0.02;

    std::mt19937_64 gen(9);
    SimulationSpec spec;
    spec.pool1 = skewed_pool(gen, 400, true);
    spec.pool0 = skewed_pool(gen, 400, false);
    spec.reps = 500;
    spec.seed = 2718;
    spec.workers = 0;
    spec.methods = {parse_method("M1-S2"), parse_method("M2-S2-S6"), parse_method("M3-S2-S6")};
    spec.n1 = spec.n0 = 30;
    const auto small = run_simulation(spec);
    spec.n1 = spec.n0 = 100;
    const auto large = run_simulation(spec);

    const bool ordering = small.methods[1].mean_ss_pointwise < small.methods[0].mean_ss_pointwise;
    bool trend = true;
    std::string detail;
    for (std::size_t j = 0; j < spec.methods.size(); ++j) {
        const auto& a = small.methods[j];
        const auto& b = large.methods[j];
        trend = trend && b.mean_ss_pointwise < a.mean_ss_pointwise &&
                b.mean_ss_simultaneous < a.mean_ss_simultaneous;
        detail += fmt("%s %.3f/%.3f -> %.3f/%.3f; ", a.method.c_str(), a.mean_ss_pointwise, a.mean_ss_simultaneous,
                      b.mean_ss_pointwise, b.mean_ss_simultaneous);
    }
    const double secs = seconds_since(start);
    report(9, "simulation harness", sd_ok && ordering && trend && secs < 1800.0,
           fmt("noise sd %.5f; mean SS pointwise/simultaneous N=60 -> N=200: %sM2 below M1 at N=60: %s; %.1f s", sd,
               detail.c_str(), ordering ? "yes" : "no", secs));
}

// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_cli_determinism() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "itequant_acceptance_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::mt19937_64 gen(55);
    std::normal_distribution<double> normal;
    {
        std::ofstream cre(dir / "trial.csv");
        cre << "id,arm,outcome\n";
        for (int i = 0; i < 40; ++i) {
            const bool t = i % 2 == 0;
            cre << "u" << i << "," << (t ? "T" : "P") << "," << std::pow(10.0, 2.0 + normal(gen) * 0.4 + (t ? 0.8 : 0.0))
                << "\n";
        }
        std::ofstream pairs(dir / "pairs.csv");
        pairs << "id,arm,pair,outcome\n";
        for (int p = 0; p < 20; ++p) {
            pairs << "a" << p << ",1,p" << p << "," << normal(gen) + 1.0 << "\n";
            pairs << "b" << p << ",0,p" << p << "," << normal(gen) << "\n";
        }
        std::ofstream cfg(dir / "run.cfg");
        cfg << "treated-label=T\ncontrol-label=P\nlog10=true\nseed=17\nmc-draws=2000\nworkers=0\n";
    }
    const std::string cli = ITEQUANT_CLI_PATH;
    const std::string d = dir.string() + "/";
    const std::vector<std::pair<std::string, std::string>> runs{
        {"cre_m3", "cre --config " + d + "run.cfg -i " + d + "trial.csv --method M3-S2-S6 --simultaneous "
                   "--exact-cap 1000 --format json"},
        {"cre_m2", "cre --config " + d + "run.cfg -i " + d + "trial.csv --method M2-S2-S6 --two-sided"},
        {"placebo", "placebo --config " + d + "run.cfg -i " + d + "trial.csv --lod 3.5 --simultaneous "
                    "--thresholds 0 0.5 1"},
        {"sens", "sensitivity -i " + d + "pairs.csv --seed 3 --mc-draws 2000 --exact-cap 100 --lambdas 2.5 4"},
        {"sim", "simulate --config " + d + "run.cfg -i " + d + "trial.csv --reps 40 --n1 20 --n0 20"},
        {"sate", "sate --config " + d + "run.cfg -i " + d + "trial.csv --sate-method frt --exact-cap 1000"},
    };
    std::size_t files = 0, differing = 0, failed_runs = 0;
    for (const auto& [name, args] : runs) {
        const std::string ext = args.find("json") != std::string::npos ? ".json" : ".csv";
        std::vector<std::map<std::string, std::string>> outputs;
        for (int round = 0; round < 2; ++round) {
            const fs::path out_dir = dir / ("round" + std::to_string(round));
            fs::create_directories(out_dir);
            const std::string cmd =
                cli + " " + args + " -o " + (out_dir / (name + ext)).string() + " 2>/dev/null";
            if (std::system(cmd.c_str()) != 0) ++failed_runs;
            std::map<std::string, std::string> found;
            for (const auto& entry : fs::directory_iterator(out_dir)) {
                const auto fname = entry.path().filename().string();
                if (fname.rfind(name, 0) == 0) found[fname] = slurp(entry.path());
            }
            outputs.push_back(std::move(found));
        }
        files += outputs[0].size();
        differing += outputs[0] != outputs[1] || outputs[0].empty();
    }
    report(10, "end-to-end determinism", failed_runs == 0 && differing == 0,
           fmt("%zu commands run twice, %zu output files, %zu failed runs, %zu differing", runs.size(), files,
               failed_runs, differing));
}

// ---------------------------------------------------------------------------

void criterion_performance() {
    std::mt19937_64 gen(200);
    std::normal_distribution<double> normal;
    std::exponential_distribution<double> expo(1.0);
    std::vector<int> z(200, 0);
    std::vector<double> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        z[i] = i < 100 ? 1 : 0;
        y[i] = normal(gen) + (z[i] ? 0.5 + expo(gen) : 0.0);
    }
    const auto table = OutcomeTable::from_arrays(z, y);
    std::vector<std::size_t> ranks(200);
    std::iota(ranks.begin(), ranks.end(), 1);
    InferenceOptions options;
    options.mode = InferenceOptions::Mode::monte_carlo;
    options.mc_draws = 10000;
    options.seed = 0xfeedULL;
    options.workers = 1;
    bool ok = true;
    std::string detail;
    for (const char* name : {"M1-S2", "M2-S2-S6", "M3-S2-S6"}) {
        const auto cfg = parse_method(name);
        const auto start = Clock::now();
        const auto profile = quantile_profile(table, ranks, cfg.method == Method::m2 ? 0.025 : 0.05, cfg, options,
                                              true);
        const double secs = seconds_since(start);
        ok = ok && secs < 60.0 && profile.lower_limits.size() == 200;
        detail += fmt("%s %.2f s, ", name, secs);
    }
    report(11, "performance", ok,
           fmt("N=200 simultaneous profile over all ranks, 10^4 Monte Carlo draws, one thread: %s", detail.c_str()));
}

}  // namespace

int main() {
    const std::vector<std::function<void()>> criteria{
        criterion_hypergeometric,   criterion_placebo_equivalence, criterion_validity,
        criterion_worst_case,       criterion_knapsack,            criterion_distribution_free,
        criterion_sensitivity,      criterion_amplification,       criterion_simulation,
        criterion_cli_determinism,  criterion_performance};
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        try {
            criteria[i]();
        } catch (const std::exception& e) {
            report(static_cast<int>(i + 1), "exception", false, e.what());
        }
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
