#pragma once

#include <iosfwd>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "dgp/credible.hpp"
#include "dgp/synth.hpp"
#include "dgp/wire.hpp"

namespace dgp {

struct RunError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Backend { InProcess, Wire };

struct ExperimentConfig {
    SchemeId scheme = SchemeId::MethodI;
    KernelSpec kernel;
    long N = 500;
    int m = 1;
    double sigma2 = 1.0;
    TruthSpec truth = TruthSpec::paper_f0();
    int grid_size = 200;
    int replicates = 1;
    int draws = 1000;
    double gamma = 0.05;
    std::uint64_t seed = 0;
    Backend backend = Backend::InProcess;
    std::vector<std::string> workers;
    bool method2_variance_only = false;

    void validate() const;
    // FNV-1a hash of the canonical config JSON, hex string.
    std::string fingerprint() const;
};

struct ResultRow {
    std::string fingerprint;
    std::string scheme;
    std::string kernel;
    long N = 0;
    int m = 0;
    int replicate = 0;
    bool failed = false;
    double mse = 0.0;
    double radius = 0.0;
    bool covered = false;
    double wall_ms_local = 0.0;
    double wall_ms_aggregate = 0.0;
};

struct Summary {
    std::size_t rows = 0;
    std::size_t failed = 0;
    double mean_mse = 0.0;
    double sd_mse = 0.0;  // sample sd (n-1)
    double coverage = 0.0;
    double mean_radius = 0.0;
    double median_wall_ms_local = 0.0;
    double median_wall_ms_aggregate = 0.0;
};

struct SlopeReport {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_norm = 0.0;
    std::vector<std::pair<double, double>> points;  // (N, mean mse)
};

// One replicate per row: generate data -> run scheme -> credible radius
// -> coverage. Replicates get disjoint seed streams; per-replicate
// numerical failures become failed rows, more than 10% failures aborts.
std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

Summary summarize(const std::vector<ResultRow>& rows);

// Least-squares slope of log(mean mse) against log N.
SlopeReport fit_loglog_slope(const std::vector<std::pair<double, double>>& n_vs_mse);
SlopeReport rate_report(const std::vector<ExperimentConfig>& configs);

nlohmann::json theory_report(const SpectralModel& model, const TruthCoefficients& truth,
                             long m);

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void write_json(std::ostream& os, const std::vector<ResultRow>& rows);

// Long-form per-figure export: grid x, truth, aggregated mean, and the
// L2 distance of each posterior draw to the mean.
void write_fig_data(std::ostream& os, const ExperimentConfig& config);

// Built-in reproduction suites (kernel in {"matern12","sqexp"} x scheme).
std::vector<ExperimentConfig> table1_suite(std::uint64_t seed, int replicates,
                                           bool include_large = false);
std::vector<ExperimentConfig> table2_suite(std::uint64_t seed, int replicates,
                                           bool include_large = false);

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
void to_json(nlohmann::json& j, const TruthSpec& t);
void from_json(const nlohmann::json& j, TruthSpec& t);

}  // namespace dgp
