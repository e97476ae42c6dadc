#pragma once

// Data ingestion, the simulation harness (resampling DGP, SS metric, method
// grid), report emission, and the analysis commands behind the CLI.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "itequant/core_model.hpp"
#include "itequant/quantile_cre.hpp"
#include "itequant/rankstat.hpp"

namespace itequant {

struct IngestConfig {
    std::string treated_label = "1";
    std::string control_label = "0";
    bool log10_transform = false;
    std::optional<double> lod;  // analysis scale (after any transform)
};

/// Reads `id,arm[,stratum],outcome`. Column order is taken from the header.
OutcomeTable parse_csv(std::istream& in, const IngestConfig& config, const std::string& source = "<input>");
OutcomeTable ingest_csv(const std::string& path, const IngestConfig& config);

struct SimulationSpec {
    std::vector<double> pool1;
    std::vector<double> pool0;
    std::size_t n1 = 30;
    std::size_t n0 = 30;
    double noise_sd = 0.15;
    std::size_t reps = 1000;
    std::vector<MethodConfig> methods;
    std::vector<double> fractions{0.5, 0.75, 0.8, 0.85, 0.9, 0.95};
    double noninformative_fill = -10.0;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    InferenceOptions inference{};  // null distributions inside each replication
    unsigned workers = 1;           // replications in parallel
};

struct DgpDraw {
    OutcomeTable table;
    PotentialOutcomeFrame science;
};

/// One replication: every unit draws Y(1) from pool 1 and Y(0) from pool 0
/// (with replacement, plus independent Gaussian noise); the first N_1 units
/// are treated.
DgpDraw run_dgp(const SimulationSpec& spec, std::size_t rep);

/// Mean of (L_k - tau_(k))^2 over the profile's ranks; -inf limits count as `fill`.
double ss_metric(const ITEProfileCI& profile, const std::vector<double>& sorted_taus, double fill);

struct MethodSummary {
    std::string method;
    std::vector<double> ss_pointwise;      // one per replication
    std::vector<double> ss_simultaneous;
    double mean_ss_pointwise = 0.0;
    double mean_ss_simultaneous = 0.0;
    std::vector<double> median_pointwise;  // one per rank
    std::vector<double> median_simultaneous;
};

struct SimulationReport {
    std::size_t n = 0;
    std::vector<double> fractions;
    std::vector<std::size_t> ranks;
    std::size_t reps = 0;
    std::vector<MethodSummary> methods;
};

/// Profiles at the confidence level 1 - alpha for every method and
/// replication; M2 runs its two steps at alpha / 2.
SimulationReport run_simulation(const SimulationSpec& spec);

using Cell = std::variant<std::string, double, std::int64_t>;

struct ReportTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

struct Report {
    std::map<std::string, std::string> meta;
    std::vector<ReportTable> tables;
};

enum class ReportFormat { csv, json };

ReportTable profile_table(const ITEProfileCI& profile, std::size_t n);
ReportTable count_table(const std::map<double, std::size_t>& counts, double alpha);

/// Shortest round-trip text for a double; "-inf"/"inf" for infinities.
std::string format_number(double v);

std::string to_csv(const ReportTable& table);
std::string to_json(const Report& report);

/// CSV: the first table goes to `path`, further tables to
/// `<stem>_<name><ext>`. JSON: one document. Returns the files written.
std::vector<std::string> emit_report(const Report& report, ReportFormat format, const std::string& path);

enum class Command { placebo, cre, stratified, sensitivity, simulate, sate };

Command parse_command(const std::string& name);

/// Everything a CLI run needs; mirrors the command-line flags.
struct AnalysisConfig {
    Command command = Command::cre;
    std::string input_path;
    IngestConfig ingest;
    double alpha = 0.05;
    std::vector<std::size_t> ranks;
    std::vector<double> fractions;
    std::string method = "M1-S2";
    std::vector<std::string> methods;  // simulate
    std::string stat = "W";            // stratified and sensitivity
    bool simultaneous = false;
    bool two_sided = false;
    std::string solver = "dp";
    std::string stratified_method = "m1";
    std::vector<double> thresholds;    // placebo N(c) table
    std::vector<double> gammas{1.0, 1.2, 1.5, 2.5, 3.3};
    std::vector<double> lambdas;       // amplification of each gamma
    double berger_boos_gamma = 0.0;
    std::string sate_method = "normal";
    std::size_t mc_draws = 10000;
    std::optional<std::uint64_t> seed;
    std::uint64_t tiebreak_seed = 0;
    std::size_t exact_cap = 200000;
    unsigned workers = 1;
    std::size_t n1 = 30, n0 = 30, reps = 1000;
    double noise_sd = 0.15;
    double fill = -10.0;
};

/// Runs one command and returns its report. Throws ValidationError for bad
/// configurations (including a Monte Carlo path without a seed) and IoError
/// for unreadable input.
Report run_analysis(const AnalysisConfig& config);

}  // namespace itequant
