// Python bindings for the itequant core.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "itequant/error.hpp"
#include "itequant/harness.hpp"
#include "itequant/hyperexact.hpp"
#include "itequant/quantile_cre.hpp"
#include "itequant/stratified.hpp"

namespace py = pybind11;
using namespace itequant;

namespace {

InferenceOptions make_options(std::size_t mc_draws, std::optional<std::uint64_t> seed, std::size_t exact_cap,
                              unsigned workers) {
    InferenceOptions o;
    o.mc_draws = mc_draws;
    o.seed = seed.value_or(0);
    o.exact_cap = exact_cap;
    o.workers = workers;
    return o;
}

py::dict profile_dict(const ITEProfileCI& p) {
    py::dict d;
    d["ranks"] = p.quantile_ranks;
    d["lower"] = p.lower_limits;
    d["level"] = p.level;
    d["simultaneous"] = p.simultaneous;
    d["method"] = p.method_tag;
    return d;
}

QuantileHypothesis hypothesis(int k, double c) { return {k, c}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Randomization inference for quantiles of individual treatment effects";
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<OutcomeTable>(m, "OutcomeTable")
        .def(py::init(&OutcomeTable::from_arrays), py::arg("z"), py::arg("y"),
             py::arg("strata") = std::vector<std::string>{}, py::arg("lod") = std::nullopt)
        .def_property_readonly("size", &OutcomeTable::size)
        .def_property_readonly("treated_count", &OutcomeTable::treated_count)
        .def_property_readonly("assignment", &OutcomeTable::assignment)
        .def_property_readonly("outcomes", &OutcomeTable::outcomes)
        .def_property_readonly("lod", &OutcomeTable::lod)
        .def("flipped", &OutcomeTable::flipped)
        .def("__len__", &OutcomeTable::size);

    m.def("read_csv", [](const std::string& path, const std::string& treated, const std::string& control,
                         bool log10, std::optional<double> lod) {
        return ingest_csv(path, IngestConfig{treated, control, log10, lod});
    }, py::arg("path"), py::arg("treated_label") = "1", py::arg("control_label") = "0", py::arg("log10") = false,
       py::arg("lod") = std::nullopt);

    m.def("hyper_pmf", [](std::int64_t n, std::int64_t successes, std::int64_t draws, std::int64_t x) {
        return hyper_pmf({n, successes, draws}, x);
    }, py::arg("N"), py::arg("n"), py::arg("N1"), py::arg("x"));
    m.def("hyper_tail", [](std::int64_t n, std::int64_t successes, std::int64_t draws, std::int64_t x) {
        return hyper_tail({n, successes, draws}, x);
    }, py::arg("N"), py::arg("n"), py::arg("N1"), py::arg("x"), "P(X >= x)");

    m.def("placebo_pvalue", [](const OutcomeTable& t, int k, double c) { return placebo_pvalue(t, hypothesis(k, c)); },
          py::arg("table"), py::arg("k"), py::arg("c"));
    m.def("placebo_lower_limit",
          [](const OutcomeTable& t, std::size_t k, double alpha) { return placebo_ci_quantile(t, k, alpha).lower; },
          py::arg("table"), py::arg("k"), py::arg("alpha") = 0.05);
    m.def("placebo_count_limit", &placebo_ci_count, py::arg("table"), py::arg("c"), py::arg("alpha") = 0.05);

    m.def("worst_case_statistic", [](const OutcomeTable& t, int k, double c, const std::string& stat) {
        const auto r = worst_case_statistic(t, hypothesis(k, c), parse_score_spec(stat));
        return py::make_tuple(r.statistic, r.delta.large_set);
    }, py::arg("table"), py::arg("k"), py::arg("c"), py::arg("stat") = "W");

    m.def("pvalue_quantile", [](const OutcomeTable& t, int k, double c, const std::string& stat,
                                std::size_t mc_draws, std::optional<std::uint64_t> seed, std::size_t exact_cap) {
        return pvalue_quantile_m1(t, hypothesis(k, c), parse_score_spec(stat),
                                  make_options(mc_draws, seed, exact_cap, 1));
    }, py::arg("table"), py::arg("k"), py::arg("c"), py::arg("stat") = "W", py::arg("mc_draws") = 10000,
       py::arg("seed") = std::nullopt, py::arg("exact_cap") = 200000);

    m.def("quantile_profile", [](const OutcomeTable& t, std::vector<std::size_t> ranks, double alpha,
                                 const std::string& method, bool simultaneous, std::size_t mc_draws,
                                 std::optional<std::uint64_t> seed, std::size_t exact_cap, unsigned workers) {
        const auto cfg = parse_method(method);
        // M2 reports 1 - 2 * alpha for its per-step alpha; callers pass the overall level.
        const double step = cfg.method == Method::m2 ? alpha / 2.0 : alpha;
        return profile_dict(quantile_profile(t, ranks, step, cfg, make_options(mc_draws, seed, exact_cap, workers),
                                             simultaneous));
    }, py::arg("table"), py::arg("ranks"), py::arg("alpha") = 0.05, py::arg("method") = "M1-S2",
       py::arg("simultaneous") = false, py::arg("mc_draws") = 10000, py::arg("seed") = std::nullopt,
       py::arg("exact_cap") = 200000, py::arg("workers") = 1);

    m.def("pvalue_stratified", [](const OutcomeTable& t, int k, double c, const std::string& stat,
                                  const std::string& solver, std::size_t mc_draws, std::optional<std::uint64_t> seed,
                                  std::size_t exact_cap) {
        return pvalue_quantile_stratified(t, hypothesis(k, c), {parse_score_spec(stat)},
                                          solver == "greedy" ? KnapsackSolver::greedy : KnapsackSolver::dp,
                                          make_options(mc_draws, seed, exact_cap, 1));
    }, py::arg("table"), py::arg("k"), py::arg("c"), py::arg("stat") = "W", py::arg("solver") = "dp",
       py::arg("mc_draws") = 10000, py::arg("seed") = std::nullopt, py::arg("exact_cap") = 200000);

    m.def("stratified_profile", [](const OutcomeTable& t, std::vector<std::size_t> ranks, double alpha,
                                   const std::string& stat, const std::string& method, const std::string& solver,
                                   std::size_t mc_draws, std::optional<std::uint64_t> seed, std::size_t exact_cap) {
        const auto sm = method == "m2" ? StratifiedMethod::m2 : StratifiedMethod::m1;
        return profile_dict(stratified_profile(t, ranks, sm == StratifiedMethod::m2 ? alpha / 2.0 : alpha,
                                               {parse_score_spec(stat)}, sm,
                                               solver == "greedy" ? KnapsackSolver::greedy : KnapsackSolver::dp,
                                               make_options(mc_draws, seed, exact_cap, 1)));
    }, py::arg("table"), py::arg("ranks"), py::arg("alpha") = 0.05, py::arg("stat") = "W", py::arg("method") = "m1",
       py::arg("solver") = "dp", py::arg("mc_draws") = 10000, py::arg("seed") = std::nullopt,
       py::arg("exact_cap") = 200000);

    m.def("sensitivity_pvalue", [](const OutcomeTable& t, int k, double c, double gamma, const std::string& stat,
                                   std::size_t mc_draws, std::optional<std::uint64_t> seed, std::size_t exact_cap) {
        return sensitivity_pvalue_pairs(t, hypothesis(k, c), gamma, parse_score_spec(stat),
                                        make_options(mc_draws, seed, exact_cap, 1));
    }, py::arg("table"), py::arg("k"), py::arg("c"), py::arg("gamma"), py::arg("stat") = "W",
       py::arg("mc_draws") = 10000, py::arg("seed") = std::nullopt, py::arg("exact_cap") = 200000);

    m.def("amplify_gamma", &amplify_gamma, py::arg("gamma"), py::arg("lambda_"));
    m.def("amplification_diagonal", &amplification_diagonal, py::arg("gamma"));

    m.def("ss_metric", &ss_metric, py::arg("profile_ranks_and_limits"), py::arg("sorted_taus"),
          py::arg("fill") = -10.0);

    py::class_<ITEProfileCI>(m, "Profile")
        .def(py::init([](std::vector<std::size_t> ranks, std::vector<double> lower) {
            ITEProfileCI p;
            p.quantile_ranks = std::move(ranks);
            p.lower_limits = std::move(lower);
            return p;
        }), py::arg("ranks"), py::arg("lower"))
        .def_readonly("ranks", &ITEProfileCI::quantile_ranks)
        .def_readonly("lower", &ITEProfileCI::lower_limits);

    py::class_<AnalysisConfig>(m, "AnalysisConfig")
        .def(py::init<>())
        .def_property("command", [](const AnalysisConfig&) { return py::none(); },
                      [](AnalysisConfig& c, const std::string& name) { c.command = parse_command(name); })
        .def_readwrite("input_path", &AnalysisConfig::input_path)
        .def_property("treated_label", [](const AnalysisConfig& c) { return c.ingest.treated_label; },
                      [](AnalysisConfig& c, const std::string& v) { c.ingest.treated_label = v; })
        .def_property("control_label", [](const AnalysisConfig& c) { return c.ingest.control_label; },
                      [](AnalysisConfig& c, const std::string& v) { c.ingest.control_label = v; })
        .def_property("log10", [](const AnalysisConfig& c) { return c.ingest.log10_transform; },
                      [](AnalysisConfig& c, bool v) { c.ingest.log10_transform = v; })
        .def_property("lod", [](const AnalysisConfig& c) { return c.ingest.lod; },
                      [](AnalysisConfig& c, std::optional<double> v) { c.ingest.lod = v; })
        .def_readwrite("alpha", &AnalysisConfig::alpha)
        .def_readwrite("ranks", &AnalysisConfig::ranks)
        .def_readwrite("fractions", &AnalysisConfig::fractions)
        .def_readwrite("method", &AnalysisConfig::method)
        .def_readwrite("methods", &AnalysisConfig::methods)
        .def_readwrite("stat", &AnalysisConfig::stat)
        .def_readwrite("simultaneous", &AnalysisConfig::simultaneous)
        .def_readwrite("two_sided", &AnalysisConfig::two_sided)
        .def_readwrite("solver", &AnalysisConfig::solver)
        .def_readwrite("stratified_method", &AnalysisConfig::stratified_method)
        .def_readwrite("thresholds", &AnalysisConfig::thresholds)
        .def_readwrite("gammas", &AnalysisConfig::gammas)
        .def_readwrite("lambdas", &AnalysisConfig::lambdas)
        .def_readwrite("berger_boos_gamma", &AnalysisConfig::berger_boos_gamma)
        .def_readwrite("sate_method", &AnalysisConfig::sate_method)
        .def_readwrite("mc_draws", &AnalysisConfig::mc_draws)
        .def_readwrite("seed", &AnalysisConfig::seed)
        .def_readwrite("tiebreak_seed", &AnalysisConfig::tiebreak_seed)
        .def_readwrite("exact_cap", &AnalysisConfig::exact_cap)
        .def_readwrite("workers", &AnalysisConfig::workers)
        .def_readwrite("n1", &AnalysisConfig::n1)
        .def_readwrite("n0", &AnalysisConfig::n0)
        .def_readwrite("reps", &AnalysisConfig::reps)
        .def_readwrite("noise_sd", &AnalysisConfig::noise_sd)
        .def_readwrite("fill", &AnalysisConfig::fill);

    m.def("run_analysis_json", [](const AnalysisConfig& c) {
        py::gil_scoped_release release;
        return to_json(run_analysis(c));
    }, py::arg("config"), "Runs one command and returns the JSON report");
}
