// itequant: command-line front end for ITE quantile inference.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 I/O failure.

#include <iostream>

#include "CLI11.hpp"
#include "itequant/error.hpp"
#include "itequant/harness.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

}  // namespace

int main(int argc, char** argv) {
    using namespace itequant;
    CLI::App app{"Randomization inference for quantiles of individual treatment effects"};
    app.set_config("--config", "", "Flat key=value file; command-line flags override it");
    app.option_defaults()->always_capture_default();

    AnalysisConfig config;
    std::string command;
    std::string output;
    std::string format = "csv";
    std::optional<double> lod;
    std::optional<std::uint64_t> seed;

    app.add_option("command", command, "placebo | cre | stratified | sensitivity | simulate | sate")->required();
    app.add_option("-i,--input", config.input_path, "CSV with columns id,arm[,stratum],outcome")->required();
    app.add_option("-o,--output", output, "Output file; tables go to stdout when omitted");
    app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--treated-label", config.ingest.treated_label, "Arm value for treated units");
    app.add_option("--control-label", config.ingest.control_label, "Arm value for control units");
    app.add_flag("--log10", config.ingest.log10_transform, "Analyse log10 of the outcome");
    app.add_option("--lod", lod, "Limit of detection on the analysis scale");
    app.add_option("--alpha", config.alpha, "Miscoverage of the reported limits");
    app.add_option("--ranks", config.ranks, "Ranks k of tau_(k)");
    app.add_option("--fractions", config.fractions, "Quantile fractions, mapped to ceil(N * beta)");
    app.add_option("--method", config.method, "M1-S2, M2-S2-S6, M3-S2-S6, ...");
    app.add_option("--methods", config.methods, "Methods compared by simulate");
    app.add_option("--stat", config.stat, "Statistic for stratified and sensitivity (W, S2, S6, ...)");
    app.add_flag("--simultaneous", config.simultaneous, "Joint coverage over the requested ranks");
    app.add_flag("--two-sided", config.two_sided, "Add upper limits, alpha/2 per side");
    app.add_option("--solver", config.solver, "dp or greedy")->check(CLI::IsMember({"dp", "greedy"}));
    app.add_option("--stratified-method", config.stratified_method, "m1 or m2")
        ->check(CLI::IsMember({"m1", "m2"}));
    app.add_option("--thresholds", config.thresholds, "Thresholds c for the N(c) table");
    app.add_option("--gammas", config.gammas, "Sensitivity parameters");
    app.add_option("--lambdas", config.lambdas, "Amplification grid");
    app.add_option("--bb-gamma", config.berger_boos_gamma, "Berger-Boos slack for M3 (0 = alpha/10)");
    app.add_option("--sate-method", config.sate_method, "normal or frt")->check(CLI::IsMember({"normal", "frt"}));
    app.add_option("--mc-draws", config.mc_draws, "Monte Carlo draws per null distribution");
    app.add_option("--seed", seed, "RNG seed; required whenever Monte Carlo is used");
    app.add_option("--tiebreak-seed", config.tiebreak_seed, "Seed of the tie-breaking order");
    app.add_option("--exact-cap", config.exact_cap, "Largest assignment count enumerated exactly");
    app.add_option("--workers", config.workers, "Threads (0 = all cores)");
    app.add_option("--n1", config.n1, "Simulated treated units");
    app.add_option("--n0", config.n0, "Simulated control units");
    app.add_option("--reps", config.reps, "Simulation replications");
    app.add_option("--noise-sd", config.noise_sd, "Simulation noise standard deviation");
    app.add_option("--fill", config.fill, "SS value for non-informative limits");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        config.command = parse_command(command);
        config.ingest.lod = lod;
        config.seed = seed;
        const auto report = run_analysis(config);
        const auto fmt = format == "json" ? ReportFormat::json : ReportFormat::csv;
        if (output.empty()) {
            if (fmt == ReportFormat::json) {
                std::cout << to_json(report);
            } else {
                for (std::size_t i = 0; i < report.tables.size(); ++i) {
                    if (i) std::cout << '\n';
                    std::cout << to_csv(report.tables[i]);
                }
            }
        } else {
            for (const auto& path : emit_report(report, fmt, output)) std::cerr << "wrote " << path << '\n';
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
