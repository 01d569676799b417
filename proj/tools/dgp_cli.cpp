// Command-line experiment runner: paper-reproduction suites, declarative
// runs, spectral theory reports, and the TCP worker.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "dgp/harness.hpp"

namespace {

using namespace dgp;

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open output file " + path);
    return os;
}

void emit_rows(const std::vector<ResultRow>& rows, const std::string& out,
               const std::string& format) {
    auto write = [&](std::ostream& os) {
        if (format == "json")
            write_json(os, rows);
        else
            write_csv(os, rows);
    };
    if (out.empty()) {
        write(std::cout);
    } else {
        auto os = open_out(out);
        write(os);
    }
}

void print_summary_header() {
    std::printf("%-8s %-9s %7s %4s %10s %10s %9s %10s\n", "scheme", "kernel", "N", "m",
                "mean_mse", "sd_mse", "coverage", "mean_rad");
}

void print_summary(const ExperimentConfig& cfg, const Summary& s) {
    std::printf("%-8s %-9s %7ld %4d %10.5f %10.5f %9.2f %10.5f\n", scheme_name(cfg.scheme),
                cfg.kernel.kind == KernelSpec::Kind::Matern12     ? "matern12"
                : cfg.kernel.kind == KernelSpec::Kind::SquaredExp ? "sqexp"
                                                                  : "series",
                cfg.N, cfg.m, s.mean_mse, s.sd_mse, s.coverage, s.mean_radius);
}

int run_suite(const std::vector<ExperimentConfig>& suite, const std::string& out,
              const std::string& format) {
    std::vector<ResultRow> all;
    print_summary_header();
    for (const auto& cfg : suite) {
        auto rows = run_experiment(cfg);
        print_summary(cfg, summarize(rows));
        all.insert(all.end(), rows.begin(), rows.end());
    }
    emit_rows(all, out, format);
    return 0;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    is >> j;
    return j.get<ExperimentConfig>();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed Gaussian-process regression benchmark"};
    app.require_subcommand(1);

    std::string config_path, out, format = "csv", bind_addr = "127.0.0.1:7700";
    std::uint64_t seed = 1;
    int replicates = -1;
    std::string backend;
    std::vector<std::string> workers;
    long max_tasks = -1;
    bool large = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "run seed");
        cmd->add_option("--replicates", replicates, "replicate count override");
        cmd->add_option("--out", out, "output file (default stdout)");
        cmd->add_option("--format", format, "csv or json")
            ->check(CLI::IsMember({"csv", "json"}));
    };

    auto* run_cmd = app.add_subcommand("run", "run one experiment config (JSON)");
    run_cmd->add_option("config", config_path, "config JSON path")->required();
    run_cmd->add_option("--backend", backend, "in_process or wire")
        ->check(CLI::IsMember({"in_process", "wire"}));
    run_cmd->add_option("--workers", workers, "worker endpoints host:port");
    add_common(run_cmd);

    auto* table1_cmd = app.add_subcommand("table1", "MSE reproduction suite");
    table1_cmd->add_flag("--large", large, "include N=50000");
    add_common(table1_cmd);

    auto* table2_cmd = app.add_subcommand("table2", "coverage reproduction suite");
    table2_cmd->add_flag("--large", large, "include N=50000");
    add_common(table2_cmd);

    auto* rates_cmd = app.add_subcommand("rates", "log-log MSE slope over N");
    add_common(rates_cmd);

    auto* theory_cmd = app.add_subcommand("theory", "spectral theory report");
    std::string profile = "polynomial";
    double alpha = 1.0, a = 0.1, b = 1.0, c = 1.0, sigma2 = 1.0;
    double truth_exponent = 2.5, truth_scale = 1.0, beta = 1.0;
    long theory_N = 10000, truth_terms = 1000, truth_start = 1, truncation = 0;
    int dim = 1, theory_m = 10;
    theory_cmd->add_option("--profile", profile)->check(CLI::IsMember({"polynomial", "exponential"}));
    theory_cmd->add_option("--alpha", alpha, "polynomial decay regularity");
    theory_cmd->add_option("--a", a, "exponential decay rate");
    theory_cmd->add_option("--b", b, "exponential decay scale");
    theory_cmd->add_option("--c", c, "eigenvalue constant");
    theory_cmd->add_option("--dim", dim);
    theory_cmd->add_option("--N", theory_N);
    theory_cmd->add_option("--sigma2", sigma2);
    theory_cmd->add_option("--m", theory_m);
    theory_cmd->add_option("--truncation", truncation);
    theory_cmd->add_option("--truth-exponent", truth_exponent, "f_j = scale * j^-exponent");
    theory_cmd->add_option("--truth-terms", truth_terms);
    theory_cmd->add_option("--truth-start", truth_start);
    theory_cmd->add_option("--truth-scale", truth_scale);
    theory_cmd->add_option("--beta", beta, "truth smoothness");
    theory_cmd->add_option("--out", out);

    auto* worker_cmd = app.add_subcommand("worker", "start a wire worker");
    worker_cmd->add_option("--bind", bind_addr, "bind address host:port");
    worker_cmd->add_option("--max-tasks", max_tasks, "exit after this many tasks");

    auto* fig_cmd = app.add_subcommand("fig-data", "per-figure long CSV");
    fig_cmd->add_option("config", config_path, "config JSON path")->required();
    fig_cmd->add_option("--seed", seed);
    fig_cmd->add_option("--out", out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            ExperimentConfig cfg = load_config(config_path);
            if (app.count("--seed") || run_cmd->count("--seed")) cfg.seed = seed;
            if (replicates > 0) cfg.replicates = replicates;
            if (backend == "wire") cfg.backend = Backend::Wire;
            if (backend == "in_process") cfg.backend = Backend::InProcess;
            if (!workers.empty()) cfg.workers = workers;
            auto rows = run_experiment(cfg);
            print_summary_header();
            print_summary(cfg, summarize(rows));
            emit_rows(rows, out, format);
            return 0;
        }
        if (table1_cmd->parsed())
            return run_suite(table1_suite(seed, replicates > 0 ? replicates : 100, large),
                             out, format);
        if (table2_cmd->parsed())
            return run_suite(table2_suite(seed, replicates > 0 ? replicates : 100, large),
                             out, format);
        if (rates_cmd->parsed()) {
            std::vector<ExperimentConfig> configs;
            for (long N : {500L, 2000L, 5000L, 20000L}) {
                ExperimentConfig cfg;
                cfg.scheme = SchemeId::MethodI;
                cfg.kernel = KernelSpec::matern12(1.0);
                cfg.N = N;
                cfg.m = 100;
                cfg.truth = TruthSpec::paper_f0();
                cfg.replicates = replicates > 0 ? replicates : 20;
                cfg.seed = seed;
                configs.push_back(std::move(cfg));
            }
            SlopeReport rep = rate_report(configs);
            nlohmann::json j{{"slope", rep.slope},
                             {"intercept", rep.intercept},
                             {"residual_norm", rep.residual_norm}};
            nlohmann::json pts = nlohmann::json::array();
            for (const auto& [N, mse] : rep.points) pts.push_back({{"N", N}, {"mse", mse}});
            j["points"] = pts;
            std::cout << j.dump(2) << '\n';
            return 0;
        }
        if (theory_cmd->parsed()) {
            EigenProfile prof = profile == "polynomial"
                                    ? EigenProfile::polynomial(alpha, dim, c)
                                    : EigenProfile::exponential(a, b, dim, c);
            SpectralModel model(prof, static_cast<double>(theory_N), sigma2, truncation);
            TruthCoefficients truth = TruthCoefficients::power_law(
                truth_exponent, truth_terms, truth_start, truth_scale, beta);
            nlohmann::json rep = theory_report(model, truth, theory_m);
            if (out.empty()) {
                std::cout << rep.dump(2) << '\n';
            } else {
                auto os = open_out(out);
                os << rep.dump(2) << '\n';
            }
            return 0;
        }
        if (worker_cmd->parsed())
            return dgp::wire::worker_serve(
                bind_addr, max_tasks > 0 ? std::optional<long>(max_tasks) : std::nullopt);
        if (fig_cmd->parsed()) {
            ExperimentConfig cfg = load_config(config_path);
            if (fig_cmd->count("--seed")) cfg.seed = seed;
            if (out.empty()) {
                write_fig_data(std::cout, cfg);
            } else {
                auto os = open_out(out);
                write_fig_data(os, cfg);
            }
            return 0;
        }
    } catch (const dgp::wire::TransportError& e) {
        std::cerr << "transport error: " << e.what() << '\n';
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const RunError& e) {
        std::cerr << "run error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
