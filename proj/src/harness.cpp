#include "itequant/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "itequant/error.hpp"
#include "itequant/hyperexact.hpp"
#include "itequant/parallel.hpp"
#include "itequant/random.hpp"
#include "itequant/stratified.hpp"

namespace itequant {

namespace {

constexpr std::uint64_t kInferenceTag = 0x73696d2d6e756c6cULL;

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    std::string out(s.substr(first, last - first + 1));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return out;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return s;
}

bool parse_double(const std::string& text, double& out) {
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    if (v.size() % 2 == 1) return v[m];
    if (v[m - 1] == kNegInf) return v[m - 1];
    return 0.5 * (v[m - 1] + v[m]);
}

double mean_of(const std::vector<double>& v) {
    double total = 0.0;
    for (double x : v) total += x;
    return v.empty() ? 0.0 : total / static_cast<double>(v.size());
}

}  // namespace

OutcomeTable parse_csv(std::istream& in, const IngestConfig& config, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(source + ": empty file");
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const auto header = split_fields(line);
    int col_id = -1, col_arm = -1, col_stratum = -1, col_outcome = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto name = lower(header[i]);
        const int idx = static_cast<int>(i);
        if (name == "id") col_id = idx;
        else if (name == "arm") col_arm = idx;
        else if (name == "stratum" || name == "pair") col_stratum = idx;
        else if (name == "outcome") col_outcome = idx;
    }
    for (auto [col, name] : {std::pair{col_id, "id"}, {col_arm, "arm"}, {col_outcome, "outcome"}}) {
        if (col < 0) throw ValidationError(source + ": missing column '" + name + "'");
    }

    std::vector<OutcomeRow> rows;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row_no;
        const auto fields = split_fields(line);
        const std::string where = source + ": row " + std::to_string(row_no);
        if (fields.size() != header.size()) {
            throw ValidationError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                                  std::to_string(fields.size()));
        }
        OutcomeRow row;
        row.participant_id = fields[col_id];
        const auto& arm = fields[col_arm];
        if (arm == config.treated_label) row.arm = 1;
        else if (arm == config.control_label) row.arm = 0;
        else throw ValidationError(where + ": unknown arm '" + arm + "'");
        if (col_stratum >= 0 && !fields[col_stratum].empty()) row.stratum = fields[col_stratum];
        double value = 0.0;
        if (!parse_double(fields[col_outcome], value)) {
            throw ValidationError(where + ": non-numeric outcome '" + fields[col_outcome] + "'");
        }
        if (config.log10_transform) {
            if (value <= 0.0) throw ValidationError(where + ": log10 needs a positive outcome");
            value = std::log10(value);
        }
        row.outcome = value;
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(source + ": no data rows");
    return OutcomeTable(std::move(rows), config.lod);
}

OutcomeTable ingest_csv(const std::string& path, const IngestConfig& config) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    return parse_csv(in, config, path);
}

DgpDraw run_dgp(const SimulationSpec& spec, std::size_t rep) {
    if (spec.pool1.empty() || spec.pool0.empty()) throw ValidationError("simulation pools must be nonempty");
    if (spec.n1 < 1 || spec.n0 < 1) throw ValidationError("both arms need at least one unit");
    if (!(spec.noise_sd >= 0.0)) throw ValidationError("noise_sd must be nonnegative");
    const std::size_t n = spec.n1 + spec.n0;
    CounterRng rng(derive_seed(spec.seed, rep), 0);
    PotentialOutcomeFrame::Column y1(n), y0(n), tau(n);
    std::vector<int> z(n, 0);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = spec.pool1[rng.below(spec.pool1.size())] + spec.noise_sd * rng.normal();
        const double b = spec.pool0[rng.below(spec.pool0.size())] + spec.noise_sd * rng.normal();
        y1[i] = a;
        y0[i] = b;
        tau[i] = a - b;
        z[i] = i < spec.n1 ? 1 : 0;
        y[i] = z[i] == 1 ? a : b;
    }
    return {OutcomeTable::from_arrays(z, y), PotentialOutcomeFrame(std::move(y1), std::move(y0), std::move(tau))};
}

double ss_metric(const ITEProfileCI& profile, const std::vector<double>& sorted_taus, double fill) {
    if (profile.quantile_ranks.size() != profile.lower_limits.size()) {
        throw ValidationError("profile ranks and limits differ in length");
    }
    if (profile.quantile_ranks.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t j = 0; j < profile.quantile_ranks.size(); ++j) {
        const std::size_t k = profile.quantile_ranks[j];
        if (k < 1 || k > sorted_taus.size()) throw ValidationError("rank " + std::to_string(k) + " out of range");
        const double limit = profile.lower_limits[j] == kNegInf ? fill : profile.lower_limits[j];
        const double gap = limit - sorted_taus[k - 1];
        total += gap * gap;
    }
    return total / static_cast<double>(profile.quantile_ranks.size());
}

SimulationReport run_simulation(const SimulationSpec& spec) {
    if (spec.reps < 1) throw ValidationError("reps must be at least 1");
    if (spec.methods.empty()) throw ValidationError("no methods to simulate");
    const std::size_t n = spec.n1 + spec.n0;
    SimulationReport report;
    report.n = n;
    report.fractions = spec.fractions;
    report.reps = spec.reps;
    for (double f : spec.fractions) report.ranks.push_back(rank_from_fraction(n, f));
    if (!std::is_sorted(report.ranks.begin(), report.ranks.end())) {
        throw ValidationError("fractions must be nondecreasing");
    }

    // The reference distributions do not depend on the data, so one seed
    // serves every replication and the null cache is shared.
    InferenceOptions inference = spec.inference;
    inference.seed = derive_seed(spec.seed, kInferenceTag);

    const std::size_t m = spec.methods.size();
    // profiles[rep][method] = {pointwise, simultaneous}
    std::vector<std::vector<std::pair<ITEProfileCI, ITEProfileCI>>> profiles(spec.reps);
    std::vector<std::vector<double>> truths(spec.reps);
    parallel_for(spec.reps, spec.workers, [&](std::size_t rep) {
        const auto draw = run_dgp(spec, rep);
        truths[rep] = empirical_ite_distribution(draw.science).sorted();
        auto& out = profiles[rep];
        for (const auto& method : spec.methods) {
            switch (method.method) {
            case Method::m1: {
                auto p = simultaneous_profile_m1(draw.table, report.ranks, spec.alpha, method, inference);
                out.emplace_back(p, p);
                break;
            }
            case Method::m2: {
                auto p = m2_profile(draw.table, report.ranks, spec.alpha / 2.0, method, inference);
                out.emplace_back(p, p);
                break;
            }
            case Method::m3:
                out.emplace_back(m3_profile(draw.table, report.ranks, spec.alpha, method, inference, false),
                                 m3_profile(draw.table, report.ranks, spec.alpha, method, inference, true));
                break;
            }
        }
    });

    for (std::size_t j = 0; j < m; ++j) {
        MethodSummary summary;
        summary.method = spec.methods[j].name();
        for (std::size_t rep = 0; rep < spec.reps; ++rep) {
            const auto& [pw, sim] = profiles[rep][j];
            summary.ss_pointwise.push_back(ss_metric(pw, truths[rep], spec.noninformative_fill));
            summary.ss_simultaneous.push_back(ss_metric(sim, truths[rep], spec.noninformative_fill));
        }
        summary.mean_ss_pointwise = mean_of(summary.ss_pointwise);
        summary.mean_ss_simultaneous = mean_of(summary.ss_simultaneous);
        for (std::size_t r = 0; r < report.ranks.size(); ++r) {
            std::vector<double> pw, sim;
            for (std::size_t rep = 0; rep < spec.reps; ++rep) {
                pw.push_back(profiles[rep][j].first.lower_limits[r]);
                sim.push_back(profiles[rep][j].second.lower_limits[r]);
            }
            summary.median_pointwise.push_back(median_of(std::move(pw)));
            summary.median_simultaneous.push_back(median_of(std::move(sim)));
        }
        report.methods.push_back(std::move(summary));
    }
    return report;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

ReportTable profile_table(const ITEProfileCI& profile, std::size_t n) {
    ReportTable table{"profile", {"rank", "fraction", "lower_limit", "level", "simultaneous", "method"}, {}};
    for (std::size_t j = 0; j < profile.quantile_ranks.size(); ++j) {
        const auto k = profile.quantile_ranks[j];
        table.rows.push_back({static_cast<std::int64_t>(k), n ? static_cast<double>(k) / static_cast<double>(n) : 0.0,
                              profile.lower_limits[j], profile.level,
                              static_cast<std::int64_t>(profile.simultaneous ? 1 : 0), profile.method_tag});
    }
    return table;
}

ReportTable count_table(const std::map<double, std::size_t>& counts, double alpha) {
    ReportTable table{"counts", {"threshold", "n_lower", "level"}, {}};
    for (const auto& [c, count] : counts) {
        table.rows.push_back({c, static_cast<std::int64_t>(count), 1.0 - alpha});
    }
    return table;
}

std::string to_csv(const ReportTable& table) {
    std::string out;
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (i) out += ',';
        out += table.columns[i];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, std::string>) out += v;
                    else if constexpr (std::is_same_v<T, double>) out += format_number(v);
                    else out += std::to_string(v);
                },
                row[i]);
        }
        out += '\n';
    }
    return out;
}

std::string to_json(const Report& report) {
    using nlohmann::ordered_json;
    ordered_json doc;
    doc["meta"] = ordered_json::object();
    for (const auto& [k, v] : report.meta) doc["meta"][k] = v;
    doc["tables"] = ordered_json::array();
    for (const auto& table : report.tables) {
        ordered_json t;
        t["name"] = table.name;
        t["columns"] = table.columns;
        t["rows"] = ordered_json::array();
        for (const auto& row : table.rows) {
            ordered_json r = ordered_json::array();
            for (const auto& cell : row) {
                std::visit(
                    [&](const auto& v) {
                        using T = std::decay_t<decltype(v)>;
                        // JSON has no infinities: -inf (non-informative) becomes null.
                        if constexpr (std::is_same_v<T, double>) {
                            if (std::isfinite(v)) r.push_back(v);
                            else if (v < 0) r.push_back(nullptr);
                            else r.push_back(format_number(v));
                        } else {
                            r.push_back(v);
                        }
                    },
                    cell);
            }
            t["rows"].push_back(std::move(r));
        }
        doc["tables"].push_back(std::move(t));
    }
    return doc.dump(2) + "\n";
}

std::vector<std::string> emit_report(const Report& report, ReportFormat format, const std::string& path) {
    namespace fs = std::filesystem;
    auto write = [](const fs::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw IoError("cannot write " + p.string());
        out << text;
        if (!out) throw IoError("failed writing " + p.string());
    };
    std::vector<std::string> written;
    const fs::path base(path);
    if (format == ReportFormat::json) {
        write(base, to_json(report));
        written.push_back(base.string());
        return written;
    }
    for (std::size_t i = 0; i < report.tables.size(); ++i) {
        fs::path p = base;
        if (i > 0) {
            p = base.parent_path() / (base.stem().string() + "_" + report.tables[i].name + base.extension().string());
        }
        write(p, to_csv(report.tables[i]));
        written.push_back(p.string());
    }
    return written;
}

Command parse_command(const std::string& name) {
    static const std::map<std::string, Command> names{
        {"placebo", Command::placebo},         {"cre", Command::cre},
        {"stratified", Command::stratified},   {"sensitivity", Command::sensitivity},
        {"simulate", Command::simulate},       {"sate", Command::sate}};
    const auto it = names.find(name);
    if (it == names.end()) throw ValidationError("unknown command '" + name + "'");
    return it->second;
}

namespace {

void require_seed(const AnalysisConfig& config, bool monte_carlo, const std::string& why) {
    if (monte_carlo && !config.seed) throw ValidationError(why + " uses Monte Carlo draws; set --seed");
}

std::vector<std::size_t> resolve_ranks(const AnalysisConfig& config, std::size_t n) {
    std::vector<std::size_t> ranks = config.ranks;
    for (double f : config.fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw ValidationError("quantile fractions must lie in (0, 1]");
        ranks.push_back(rank_from_fraction(n, f));
    }
    if (ranks.empty()) {
        for (std::size_t k = 1; k <= n; ++k) ranks.push_back(k);
    }
    std::sort(ranks.begin(), ranks.end());
    ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
    for (auto k : ranks) {
        if (k < 1 || k > n) throw ValidationError("rank " + std::to_string(k) + " outside 1.." + std::to_string(n));
    }
    return ranks;
}

InferenceOptions inference_of(const AnalysisConfig& config) {
    InferenceOptions options;
    options.mc_draws = config.mc_draws;
    options.seed = config.seed.value_or(0);
    options.exact_cap = config.exact_cap;
    options.workers = config.workers;
    return options;
}

double stratified_assignments(const OutcomeTable& table) {
    const auto layout = table.strata();
    double total = 1.0;
    for (const auto& members : layout.members) {
        std::size_t treated = 0;
        for (auto i : members) treated += table.assignment()[i] == 1;
        total *= assignment_count(members.size(), treated);
    }
    return total;
}

void put(Report& report, const std::string& key, double v) { report.meta[key] = format_number(v); }

Report placebo_report(const AnalysisConfig& config) {
    const auto table = ingest_csv(config.input_path, config.ingest);
    if (!table.lod()) throw ValidationError("placebo mode requires lod");
    const double lod = *table.lod();
    const auto shifted = lod_shift(table, lod);
    validate_table(shifted, TableMode::placebo);
    require_seed(config, config.simultaneous, "simultaneous placebo inference");
    const auto ranks = resolve_ranks(config, table.size());
    const auto result = placebo_inference(shifted, ranks, config.thresholds, config.alpha, config.simultaneous,
                                          config.mc_draws, config.seed.value_or(0));
    Report report;
    report.meta["command"] = "placebo";
    put(report, "lod", lod);
    put(report, "alpha", config.alpha);
    report.meta["limit_scale"] = "ite";
    auto profile = profile_table(result.profile, table.size());
    profile.columns.push_back("outcome_scale_limit");
    for (std::size_t j = 0; j < profile.rows.size(); ++j) {
        profile.rows[j].push_back(lod_unshift(result.profile.lower_limits[j], lod));
    }
    report.tables.push_back(std::move(profile));
    report.tables.push_back(count_table(result.count_limits, result.alpha));
    return report;
}

Report cre_report(const AnalysisConfig& config) {
    auto table = ingest_csv(config.input_path, config.ingest);
    validate_table(table, TableMode::cre);
    auto method = parse_method(config.method, config.tiebreak_seed);
    method.berger_boos_gamma = config.berger_boos_gamma;
    const auto ranks = resolve_ranks(config, table.size());
    const auto options = inference_of(config);
    const bool mc = resolve_mode(options, assignment_count(table.size(), table.treated_count())) ==
                        NullMode::monte_carlo ||
                    (method.method == Method::m3 && config.simultaneous && ranks.size() > 1);
    require_seed(config, mc, "this design");

    // --alpha is the miscoverage of the reported profile; two-sided output
    // spends half of it on each side, and M2 splits again between its steps.
    const double side_alpha = config.two_sided ? config.alpha / 2.0 : config.alpha;
    const double call_alpha = method.method == Method::m2 ? side_alpha / 2.0 : side_alpha;
    auto profile = quantile_profile(table, ranks, call_alpha, method, options, config.simultaneous);

    Report report;
    report.meta["command"] = "cre";
    report.meta["method"] = method.name();
    put(report, "alpha", config.alpha);
    auto out = profile_table(profile, table.size());
    if (config.two_sided) {
        // Upper limits for tau_(k) are negated lower limits for rank N+1-k
        // of the effects on the negated outcomes.
        std::vector<double> negated = table.outcomes();
        for (auto& y : negated) y = -y;
        const auto mirror = table.with_outcomes(std::move(negated));
        const std::size_t n = table.size();
        std::vector<std::size_t> mirror_ranks;
        for (auto it = ranks.rbegin(); it != ranks.rend(); ++it) mirror_ranks.push_back(n + 1 - *it);
        const auto upper = quantile_profile(mirror, mirror_ranks, call_alpha, method, options, config.simultaneous);
        out.columns.push_back("upper_limit");
        for (std::size_t j = 0; j < ranks.size(); ++j) {
            out.rows[j].push_back(-upper.lower_limits[ranks.size() - 1 - j]);
            std::get<double>(out.rows[j][3]) = 1.0 - config.alpha;
        }
        report.meta["sides"] = "two";
    }
    report.tables.push_back(std::move(out));
    return report;
}

Report stratified_report(const AnalysisConfig& config) {
    const auto table = ingest_csv(config.input_path, config.ingest);
    validate_table(table, TableMode::stratified);
    const std::vector<RankScoreSpec> specs{parse_score_spec(config.stat, config.tiebreak_seed)};
    StratifiedMethod method;
    if (config.stratified_method == "m1") method = StratifiedMethod::m1;
    else if (config.stratified_method == "m2") method = StratifiedMethod::m2;
    else throw ValidationError("stratified method must be m1 or m2");
    KnapsackSolver solver;
    if (config.solver == "dp") solver = KnapsackSolver::dp;
    else if (config.solver == "greedy") solver = KnapsackSolver::greedy;
    else throw ValidationError("solver must be dp or greedy");
    const auto options = inference_of(config);
    require_seed(config, resolve_mode(options, stratified_assignments(table)) == NullMode::monte_carlo,
                 "this stratified design");
    const auto ranks = resolve_ranks(config, table.size());
    const double call_alpha = method == StratifiedMethod::m2 ? config.alpha / 2.0 : config.alpha;
    const auto profile = stratified_profile(table, ranks, call_alpha, specs, method, solver, options);
    Report report;
    report.meta["command"] = "stratified";
    report.meta["solver"] = config.solver;
    put(report, "alpha", config.alpha);
    report.tables.push_back(profile_table(profile, table.size()));
    return report;
}

Report sensitivity_report(const AnalysisConfig& config) {
    const auto table = ingest_csv(config.input_path, config.ingest);
    validate_table(table, TableMode::stratified);
    const auto spec = parse_score_spec(config.stat, config.tiebreak_seed);
    const auto options = inference_of(config);
    require_seed(config, resolve_mode(options, std::ldexp(1.0, static_cast<int>(table.strata().size()))) ==
                             NullMode::monte_carlo,
                 "sensitivity analysis with this many pairs");
    const auto ranks = resolve_ranks(config, table.size());
    const auto curve = sensitivity_profile_pairs(table, ranks, config.alpha, config.gammas, spec, options);
    Report report;
    report.meta["command"] = "sensitivity";
    put(report, "alpha", config.alpha);
    ReportTable sens{"sensitivity", {"gamma", "rank", "fraction", "lower_limit", "level"}, {}};
    const double n = static_cast<double>(table.size());
    for (std::size_t g = 0; g < curve.gammas.size(); ++g) {
        const auto& p = curve.profiles[g];
        for (std::size_t j = 0; j < p.quantile_ranks.size(); ++j) {
            const auto k = p.quantile_ranks[j];
            sens.rows.push_back({curve.gammas[g], static_cast<std::int64_t>(k), static_cast<double>(k) / n,
                                 p.lower_limits[j], p.level});
        }
    }
    report.tables.push_back(std::move(sens));
    if (!config.lambdas.empty()) {
        ReportTable amp{"amplification", {"gamma", "lambda", "delta"}, {}};
        for (double gamma : config.gammas) {
            for (double lambda : config.lambdas) {
                if (gamma < 1.0 || lambda <= gamma) continue;
                amp.rows.push_back({gamma, lambda, amplify_gamma(gamma, lambda)});
            }
        }
        report.tables.push_back(std::move(amp));
    }
    return report;
}

Report simulate_report(const AnalysisConfig& config) {
    require_seed(config, true, "simulation");
    const auto table = ingest_csv(config.input_path, config.ingest);
    SimulationSpec spec;
    for (std::size_t i = 0; i < table.size(); ++i) {
        (table.assignment()[i] == 1 ? spec.pool1 : spec.pool0).push_back(table.outcomes()[i]);
    }
    spec.n1 = config.n1;
    spec.n0 = config.n0;
    spec.noise_sd = config.noise_sd;
    spec.reps = config.reps;
    spec.noninformative_fill = config.fill;
    spec.alpha = config.alpha;
    spec.seed = *config.seed;
    if (!config.fractions.empty()) spec.fractions = config.fractions;
    const std::vector<std::string> names =
        config.methods.empty() ? std::vector<std::string>{"M1-S2", "M2-S2-S6", "M3-S2-S6"} : config.methods;
    for (const auto& name : names) {
        auto m = parse_method(name, config.tiebreak_seed);
        m.berger_boos_gamma = config.berger_boos_gamma;
        spec.methods.push_back(m);
    }
    spec.inference = inference_of(config);
    spec.inference.workers = 1;
    spec.workers = config.workers;
    const auto sim = run_simulation(spec);

    Report report;
    report.meta["command"] = "simulate";
    put(report, "alpha", config.alpha);
    report.meta["reps"] = std::to_string(sim.reps);
    report.meta["n"] = std::to_string(sim.n);
    ReportTable summary{"summary", {"method", "reps", "mean_ss_pointwise", "mean_ss_simultaneous"}, {}};
    ReportTable medians{"medians", {"method", "rank", "fraction", "median_pointwise", "median_simultaneous"}, {}};
    for (const auto& m : sim.methods) {
        summary.rows.push_back({m.method, static_cast<std::int64_t>(sim.reps), m.mean_ss_pointwise,
                                m.mean_ss_simultaneous});
        for (std::size_t r = 0; r < sim.ranks.size(); ++r) {
            medians.rows.push_back({m.method, static_cast<std::int64_t>(sim.ranks[r]), sim.fractions[r],
                                    m.median_pointwise[r], m.median_simultaneous[r]});
        }
    }
    report.tables.push_back(std::move(summary));
    report.tables.push_back(std::move(medians));
    return report;
}

Report sate_report(const AnalysisConfig& config) {
    const auto table = ingest_csv(config.input_path, config.ingest);
    validate_table(table, TableMode::cre);
    SateMethod method;
    if (config.sate_method == "normal") method = SateMethod::normal_approx;
    else if (config.sate_method == "frt") method = SateMethod::studentized_frt;
    else throw ValidationError("sate method must be normal or frt");
    const auto options = inference_of(config);
    require_seed(config,
                 method == SateMethod::studentized_frt &&
                     resolve_mode(options, assignment_count(table.size(), table.treated_count())) ==
                         NullMode::monte_carlo,
                 "this randomization test");
    const auto result = sate_lower_limit(table, config.alpha, method, options);
    Report report;
    report.meta["command"] = "sate";
    put(report, "alpha", config.alpha);
    report.tables.push_back({"sate",
                             {"method", "estimate", "std_error", "lower_limit", "level", "warning"},
                             {{config.sate_method, result.estimate, result.std_error, result.interval.lower,
                               result.interval.level, result.warning.value_or("")}}});
    return report;
}

}  // namespace

Report run_analysis(const AnalysisConfig& config) {
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    if (config.mc_draws < 1) throw ValidationError("mc_draws must be positive");
    Report report;
    switch (config.command) {
    case Command::placebo: report = placebo_report(config); break;
    case Command::cre: report = cre_report(config); break;
    case Command::stratified: report = stratified_report(config); break;
    case Command::sensitivity: report = sensitivity_report(config); break;
    case Command::simulate: report = simulate_report(config); break;
    case Command::sate: report = sate_report(config); break;
    }
    if (config.seed) report.meta["seed"] = std::to_string(*config.seed);
    return report;
}

}  // namespace itequant
