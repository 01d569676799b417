#include "dgp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>
#include <ostream>
#include <thread>

namespace dgp {

namespace {

const char* kernel_label(const KernelSpec& k) {
    switch (k.kind) {
        case KernelSpec::Kind::Matern12: return "matern12";
        case KernelSpec::Kind::SquaredExp: return "sqexp";
        case KernelSpec::Kind::Series: return "series";
    }
    return "?";
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

void ExperimentConfig::validate() const {
    kernel.validate();
    if (N < 1) throw ConfigError("config: N must be >= 1");
    if (m < 1) throw ConfigError("config: m must be >= 1");
    if (N % m != 0) throw ConfigError("config: N mod m must be 0");
    if (sigma2 <= 0) throw ConfigError("config: sigma2 must be positive");
    if (grid_size < 1) throw ConfigError("config: grid_size must be >= 1");
    if (replicates < 1) throw ConfigError("config: replicates must be >= 1");
    if (draws < 100) throw ConfigError("config: draws must be >= 100");
    if (gamma <= 0 || gamma >= 1) throw ConfigError("config: gamma must be in (0,1)");
    if (backend == Backend::Wire && workers.empty())
        throw ConfigError("config: wire backend needs workers");
}

std::string ExperimentConfig::fingerprint() const {
    nlohmann::json j = *this;
    const std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

ResultRow run_replicate(const ExperimentConfig& cfg, int replicate,
                        const std::string& fingerprint, const GridSpec& grid,
                        const Eigen::VectorXd& truth_on_grid) {
    using clock = std::chrono::steady_clock;
    ResultRow row;
    row.fingerprint = fingerprint;
    row.scheme = scheme_name(cfg.scheme);
    row.kernel = kernel_label(cfg.kernel);
    row.N = cfg.N;
    row.m = cfg.m;
    row.replicate = replicate;

    const std::uint64_t rep_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(replicate));
    SyntheticDataset data =
        generate(cfg.N, cfg.truth, cfg.sigma2, derive_seed(rep_seed, 0));

    BarycenterOptions opts;
    opts.variance_only = cfg.method2_variance_only;
    Rng run_rng = make_rng(derive_seed(rep_seed, 1));

    AggregatedPosterior agg;
    const auto t0 = clock::now();
    if (cfg.backend == Backend::Wire) {
        agg = wire::coordinate(cfg.workers, cfg.scheme, cfg.kernel, data.X, data.Y,
                               cfg.sigma2, cfg.m, grid, run_rng, {}, opts);
        row.wall_ms_local = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    } else {
        std::vector<Shard> shards = shard(data.X, data.Y, cfg.m, run_rng);
        std::vector<GridPosterior> locals(shards.size());
        for (std::size_t k = 0; k < shards.size(); ++k)
            locals[k] = local_posterior(cfg.scheme, cfg.kernel, shards[k], cfg.sigma2,
                                        cfg.m, grid);
        const auto t1 = clock::now();
        row.wall_ms_local = std::chrono::duration<double, std::milli>(t1 - t0).count();
        agg = aggregate(cfg.scheme, locals, run_rng, opts);
        row.wall_ms_aggregate =
            std::chrono::duration<double, std::milli>(clock::now() - t1).count();
    }

    const double err = l2_norm(grid, (agg.mean - truth_on_grid).eval());
    row.mse = err * err;

    Rng ball_rng = make_rng(derive_seed(rep_seed, 2));
    CredibleBall ball = radius(agg, cfg.gamma, cfg.draws, ball_rng);
    row.radius = ball.radius;
    row.covered = covered(ball, truth_on_grid, grid);
    return row;
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::string fp = cfg.fingerprint();
    const GridSpec grid = GridSpec::uniform(cfg.grid_size);
    const Eigen::VectorXd truth_on_grid = f0_on_points(cfg.truth, grid.points);

    std::vector<ResultRow> rows(static_cast<std::size_t>(cfg.replicates));
    std::atomic<int> failures{0};

    auto run_one = [&](int r) {
        try {
            rows[static_cast<std::size_t>(r)] = run_replicate(cfg, r, fp, grid, truth_on_grid);
        } catch (const NumericalError&) {
            ResultRow& row = rows[static_cast<std::size_t>(r)];
            row.fingerprint = fp;
            row.scheme = scheme_name(cfg.scheme);
            row.kernel = kernel_label(cfg.kernel);
            row.N = cfg.N;
            row.m = cfg.m;
            row.replicate = r;
            row.failed = true;
            ++failures;
        }
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers =
        std::min<unsigned>(hw, static_cast<unsigned>(cfg.replicates));
    if (workers <= 1 || cfg.backend == Backend::Wire) {
        for (int r = 0; r < cfg.replicates; ++r) run_one(r);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < workers; ++t)
            pool.emplace_back([&] {
                for (int r = next++; r < cfg.replicates; r = next++) run_one(r);
            });
        for (auto& t : pool) t.join();
    }

    if (10 * failures.load() > cfg.replicates)
        throw RunError("run_experiment: more than 10% of replicates failed");
    return rows;
}

Summary summarize(const std::vector<ResultRow>& rows) {
    Summary s;
    s.rows = rows.size();
    std::vector<double> mses, radii, wl, wa;
    std::size_t covered_count = 0;
    for (const auto& r : rows) {
        if (r.failed) {
            ++s.failed;
            continue;
        }
        mses.push_back(r.mse);
        radii.push_back(r.radius);
        wl.push_back(r.wall_ms_local);
        wa.push_back(r.wall_ms_aggregate);
        if (r.covered) ++covered_count;
    }
    if (mses.empty()) throw RunError("summarize: all rows failed");
    const double n = static_cast<double>(mses.size());
    for (double v : mses) s.mean_mse += v;
    s.mean_mse /= n;
    if (mses.size() > 1) {
        double ss = 0.0;
        for (double v : mses) ss += (v - s.mean_mse) * (v - s.mean_mse);
        s.sd_mse = std::sqrt(ss / (n - 1.0));
    }
    for (double v : radii) s.mean_radius += v;
    s.mean_radius /= n;
    s.coverage = static_cast<double>(covered_count) / n;
    s.median_wall_ms_local = median(wl);
    s.median_wall_ms_aggregate = median(wa);
    return s;
}

SlopeReport fit_loglog_slope(const std::vector<std::pair<double, double>>& n_vs_mse) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& [N, mse] : n_vs_mse)
        if (mse > 0) pts.emplace_back(N, mse);
    if (pts.size() < 2) throw ConfigError("fit_loglog_slope: need >= 2 positive points");

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [N, mse] : pts) {
        const double x = std::log(N), y = std::log(mse);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(pts.size());
    SlopeReport rep;
    rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    rep.intercept = (sy - rep.slope * sx) / n;
    double rss = 0.0;
    for (const auto& [N, mse] : pts) {
        const double resid = std::log(mse) - rep.intercept - rep.slope * std::log(N);
        rss += resid * resid;
    }
    rep.residual_norm = std::sqrt(rss);
    rep.points = pts;
    return rep;
}

SlopeReport rate_report(const std::vector<ExperimentConfig>& configs) {
    if (configs.size() < 3) throw ConfigError("rate_report: need >= 3 sample sizes");
    std::vector<std::pair<double, double>> pts;
    for (const auto& cfg : configs) {
        Summary s = summarize(run_experiment(cfg));
        pts.emplace_back(static_cast<double>(cfg.N), s.mean_mse);
    }
    return fit_loglog_slope(pts);
}

nlohmann::json theory_report(const SpectralModel& model, const TruthCoefficients& truth,
                             long m) {
    const double b = bias_sq(model, truth);
    const double v = variance_proxy(model);
    const DeltaN d = delta_N(model, m);
    const CoverageRegime regime = coverage_regime(model, truth);
    const char* regime_name =
        regime.kind == CoverageRegime::Kind::CoverageOne   ? "coverage_one"
        : regime.kind == CoverageRegime::Kind::CoverageZero ? "coverage_zero"
                                                            : "indeterminate";
    return nlohmann::json{
        {"bias_sq", b},
        {"variance_proxy", v},
        {"rate_bound", b + v},
        {"delta_N", d.value},
        {"delta_budget_exhausted", d.budget_exhausted},
        {"coverage_regime", regime_name},
        {"coverage_ratio", regime.ratio},
        {"spectral_condition_ok", model.spectral_condition_holds()},
    };
}

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
    // wall-clock columns are intentionally absent: identical config+seed
    // must give byte-identical files
    os << "fingerprint,scheme,kernel,N,m,replicate,failed,mse,radius,covered\n";
    for (const auto& r : rows) {
        os << r.fingerprint << ',' << r.scheme << ',' << r.kernel << ',' << r.N << ','
           << r.m << ',' << r.replicate << ',' << (r.failed ? 1 : 0) << ',' << fmt(r.mse)
           << ',' << fmt(r.radius) << ',' << (r.covered ? 1 : 0) << '\n';
    }
}

void write_json(std::ostream& os, const std::vector<ResultRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        arr.push_back({
            {"fingerprint", r.fingerprint},
            {"scheme", r.scheme},
            {"kernel", r.kernel},
            {"N", r.N},
            {"m", r.m},
            {"replicate", r.replicate},
            {"failed", r.failed},
            {"mse", r.mse},
            {"radius", r.radius},
            {"covered", r.covered},
        });
    }
    os << arr.dump(2) << '\n';
}

void write_fig_data(std::ostream& os, const ExperimentConfig& cfg) {
    cfg.validate();
    const GridSpec grid = GridSpec::uniform(cfg.grid_size);
    const Eigen::VectorXd truth_on_grid = f0_on_points(cfg.truth, grid.points);

    const std::uint64_t rep_seed = derive_seed(cfg.seed, 0);
    SyntheticDataset data = generate(cfg.N, cfg.truth, cfg.sigma2, derive_seed(rep_seed, 0));
    Rng run_rng = make_rng(derive_seed(rep_seed, 1));
    BarycenterOptions opts;
    opts.variance_only = cfg.method2_variance_only;
    AggregatedPosterior agg = run_scheme(cfg.scheme, cfg.kernel, data.X, data.Y, cfg.sigma2,
                                         cfg.m, grid, run_rng, opts);

    GridPosterior gp;
    gp.grid = agg.grid;
    gp.mean = agg.mean;
    gp.cov = agg.cov;
    Rng ball_rng = make_rng(derive_seed(rep_seed, 2));
    Eigen::MatrixXd draws = sample(gp, ball_rng, cfg.draws);

    os << "kind,index,x,value\n";
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        os << "truth," << i << ',' << fmt(grid.points(i, 0)) << ','
           << fmt(truth_on_grid[i]) << '\n';
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        os << "mean," << i << ',' << fmt(grid.points(i, 0)) << ',' << fmt(agg.mean[i])
           << '\n';
    for (int k = 0; k < cfg.draws; ++k) {
        const double dist = l2_norm(grid, (draws.row(k).transpose() - agg.mean).eval());
        os << "draw_distance," << k << ",," << fmt(dist) << '\n';
    }
}

namespace {

std::vector<ExperimentConfig> paper_suite(std::uint64_t seed, int replicates,
                                          bool include_large) {
    std::vector<long> Ns{500, 2000, 5000, 20000};
    if (include_large) Ns.push_back(50000);
    std::vector<ExperimentConfig> out;
    for (SchemeId scheme : {SchemeId::MethodI, SchemeId::MethodII}) {
        for (const char* kernel : {"matern12", "sqexp"}) {
            for (long N : Ns) {
                ExperimentConfig cfg;
                cfg.scheme = scheme;
                cfg.kernel = std::string(kernel) == "matern12"
                                 ? KernelSpec::matern12(1.0)
                                 : KernelSpec::squared_exp(tau_for(N, 1.0));
                cfg.N = N;
                cfg.m = 100;
                cfg.truth = TruthSpec::paper_f0();
                cfg.replicates = replicates;
                cfg.seed = seed;
                out.push_back(std::move(cfg));
            }
        }
    }
    return out;
}

}  // namespace

std::vector<ExperimentConfig> table1_suite(std::uint64_t seed, int replicates,
                                           bool include_large) {
    return paper_suite(seed, replicates, include_large);
}

std::vector<ExperimentConfig> table2_suite(std::uint64_t seed, int replicates,
                                           bool include_large) {
    return paper_suite(seed, replicates, include_large);
}

void to_json(nlohmann::json& j, const TruthSpec& t) {
    switch (t.kind) {
        case TruthSpec::Kind::Zero:
            j = nlohmann::json{{"kind", "zero"}};
            break;
        case TruthSpec::Kind::PaperF0:
            j = nlohmann::json{{"kind", "paper_f0"}, {"terms", t.terms}};
            break;
        case TruthSpec::Kind::SeriesTruth: {
            nlohmann::json coeffs = nlohmann::json::array();
            for (const auto& [idx, f] : t.coeffs.coeffs)
                coeffs.push_back({{"j", idx}, {"f", f}});
            j = nlohmann::json{{"kind", "series"},
                               {"beta", t.coeffs.smoothness_beta},
                               {"coeffs", coeffs}};
            break;
        }
    }
}

void from_json(const nlohmann::json& j, TruthSpec& t) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "zero") {
        t = TruthSpec::zero();
    } else if (kind == "paper_f0") {
        t = TruthSpec::paper_f0(j.value("terms", 200L));
    } else if (kind == "series") {
        TruthCoefficients coeffs;
        coeffs.smoothness_beta = j.value("beta", 1.0);
        for (const auto& e : j.at("coeffs"))
            coeffs.coeffs.emplace_back(e.at("j").get<MultiIndex>(),
                                       e.at("f").get<double>());
        t = TruthSpec::series(std::move(coeffs));
    } else {
        throw ConfigError("TruthSpec: unknown kind '" + kind + "'");
    }
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = nlohmann::json{
        {"scheme", scheme_name(c.scheme)},
        {"kernel", c.kernel},
        {"N", c.N},
        {"m", c.m},
        {"sigma2", c.sigma2},
        {"truth", c.truth},
        {"grid_size", c.grid_size},
        {"replicates", c.replicates},
        {"draws", c.draws},
        {"gamma", c.gamma},
        {"seed", c.seed},
        {"backend", c.backend == Backend::Wire ? "wire" : "in_process"},
        {"method2_variance_only", c.method2_variance_only},
    };
    if (c.backend == Backend::Wire) j["workers"] = c.workers;
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c = ExperimentConfig{};
    c.scheme = scheme_from_name(j.at("scheme").get<std::string>());
    c.kernel = j.at("kernel").get<KernelSpec>();
    c.N = j.at("N").get<long>();
    c.m = j.at("m").get<int>();
    c.sigma2 = j.value("sigma2", 1.0);
    if (j.contains("truth")) c.truth = j.at("truth").get<TruthSpec>();
    c.grid_size = j.value("grid_size", 200);
    c.replicates = j.value("replicates", 1);
    c.draws = j.value("draws", 1000);
    c.gamma = j.value("gamma", 0.05);
    c.seed = j.value("seed", std::uint64_t{0});
    const std::string backend = j.value("backend", std::string("in_process"));
    if (backend == "wire")
        c.backend = Backend::Wire;
    else if (backend == "in_process")
        c.backend = Backend::InProcess;
    else
        throw ConfigError("config: unknown backend '" + backend + "'");
    c.workers = j.value("workers", std::vector<std::string>{});
    c.method2_variance_only = j.value("method2_variance_only", false);
    c.validate();
}

}  // namespace dgp
