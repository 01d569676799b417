#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "dgp/harness.hpp"

using namespace dgp;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.scheme = SchemeId::MethodI;
    c.kernel = KernelSpec::matern12(1.0);
    c.N = 60;
    c.m = 3;
    c.sigma2 = 1.0;
    c.truth = TruthSpec::paper_f0();
    c.grid_size = 20;
    c.replicates = 3;
    c.draws = 200;
    c.gamma = 0.05;
    c.seed = 11;
    return c;
}

}  // namespace

TEST_CASE("config validation") {
    ExperimentConfig c = small_config();
    CHECK_NOTHROW(c.validate());
    c.N = 61;  // not divisible by m
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.replicates = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.gamma = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.backend = Backend::Wire;
    CHECK_THROWS_AS(c.validate(), ConfigError);  // wire backend needs workers
}

TEST_CASE("config json round trip and stable fingerprint") {
    ExperimentConfig c = small_config();
    nlohmann::json j = c;
    auto back = j.get<ExperimentConfig>();
    CHECK(nlohmann::json(back).dump() == j.dump());
    CHECK(back.fingerprint() == c.fingerprint());
    back.seed += 1;
    CHECK(back.fingerprint() != c.fingerprint());
}

TEST_CASE("run_experiment produces one row per replicate, deterministically") {
    ExperimentConfig c = small_config();
    auto rows = run_experiment(c);
    REQUIRE(rows.size() == 3);
    for (int r = 0; r < 3; ++r) {
        CHECK(rows[r].replicate == r);
        CHECK(rows[r].scheme == "method1");
        CHECK(rows[r].N == 60);
        CHECK_FALSE(rows[r].failed);
        CHECK(rows[r].mse > 0.0);
        CHECK(rows[r].radius > 0.0);
    }
    auto rows2 = run_experiment(c);
    for (int r = 0; r < 3; ++r) {
        CHECK(rows[r].mse == rows2[r].mse);
        CHECK(rows[r].radius == rows2[r].radius);
        CHECK(rows[r].covered == rows2[r].covered);
    }
    // replicates draw different data
    CHECK(rows[0].mse != rows[1].mse);
}

TEST_CASE("near-noiseless zero truth yields near-zero mse") {
    ExperimentConfig c = small_config();
    c.truth = TruthSpec::zero();
    c.sigma2 = 1e-6;
    c.scheme = SchemeId::MethodII;
    c.replicates = 2;
    auto rows = run_experiment(c);
    for (const auto& row : rows) CHECK(row.mse < 1e-6);
}

TEST_CASE("summary statistics match hand computation") {
    ResultRow a, b;
    a.mse = 0.01;
    a.radius = 0.2;
    a.covered = true;
    b.mse = 0.03;
    b.radius = 0.4;
    b.covered = false;
    Summary s = summarize({a, b});
    CHECK(s.rows == 2);
    CHECK(s.mean_mse == doctest::Approx(0.02));
    CHECK(s.sd_mse == doctest::Approx(0.01 * std::sqrt(2.0)));  // sample sd, n-1
    CHECK(s.coverage == doctest::Approx(0.5));
    CHECK(s.mean_radius == doctest::Approx(0.3));

    // failed rows are excluded from the averages but counted
    ResultRow f;
    f.failed = true;
    f.mse = 1e9;
    Summary s2 = summarize({a, b, f});
    CHECK(s2.failed == 1);
    CHECK(s2.mean_mse == doctest::Approx(0.02));
}

TEST_CASE("log-log slope recovers an exact power law") {
    std::vector<std::pair<double, double>> pts;
    for (double n : {500.0, 2000.0, 5000.0, 20000.0})
        pts.emplace_back(n, 3.7 * std::pow(n, -2.0 / 3.0));
    SlopeReport rep = fit_loglog_slope(pts);
    CHECK(rep.slope == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
    CHECK(rep.residual_norm < 1e-12);
}

TEST_CASE("published matern mse sequence has the expected decay slope") {
    std::vector<std::pair<double, double>> pts{
        {500.0, 0.020}, {2000.0, 0.008}, {5000.0, 0.005}, {20000.0, 0.002}};
    SlopeReport rep = fit_loglog_slope(pts);
    CHECK(rep.slope < -0.5);
    CHECK(rep.slope > -0.8);
}

TEST_CASE("theory report for a zero truth is in the full-coverage regime") {
    SpectralModel model(EigenProfile::polynomial(2.0), 10000.0, 1.0);
    TruthCoefficients truth;  // empty: f0 = 0
    nlohmann::json rep = theory_report(model, truth, 2);
    CHECK(rep.at("bias_sq").get<double>() == 0.0);
    CHECK(rep.at("coverage_regime").get<std::string>() == "coverage_one");
    CHECK(rep.at("spectral_condition_ok").get<bool>());
    CHECK(rep.at("variance_proxy").get<double>() > 0.0);
    CHECK(rep.at("delta_N").get<double>() >= 0.0);
}

TEST_CASE("theory report: matched smoothness keeps delta_N below the rate") {
    for (double N : {1e4, 1e5, 1e6}) {
        SpectralModel model(EigenProfile::polynomial(2.0), N, 1.0);
        TruthCoefficients truth = TruthCoefficients::power_law(2.51, 100000);
        nlohmann::json rep = theory_report(model, truth, 2);
        const double rate = std::pow(N, -4.0 / 5.0);
        CHECK(rep.at("delta_N").get<double>() < 0.1 * rate);
        CHECK(rep.at("rate_bound").get<double>() < 10.0 * rate);
        CHECK(rep.at("rate_bound").get<double>() > 0.1 * rate);
    }
}

TEST_CASE("csv export is stable and excludes wall-clock columns") {
    ExperimentConfig c = small_config();
    auto rows = run_experiment(c);
    std::ostringstream a, b;
    write_csv(a, rows);
    write_csv(b, run_experiment(c));
    CHECK(a.str() == b.str());
    const std::string header = a.str().substr(0, a.str().find('\n'));
    CHECK(header == "fingerprint,scheme,kernel,N,m,replicate,failed,mse,radius,covered");
    CHECK(a.str().find("wall") == std::string::npos);
}

TEST_CASE("json export round trips the rows") {
    ExperimentConfig c = small_config();
    c.replicates = 2;
    auto rows = run_experiment(c);
    std::ostringstream os;
    write_json(os, rows);
    auto parsed = nlohmann::json::parse(os.str());
    REQUIRE(parsed.is_array());
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].at("mse").get<double>() == rows[0].mse);
    CHECK(parsed[1].at("radius").get<double>() == rows[1].radius);
}

TEST_CASE("fig-data export contains truth, mean and draw distances") {
    ExperimentConfig c = small_config();
    c.replicates = 1;
    c.draws = 150;
    std::ostringstream os;
    write_fig_data(os, c);
    const std::string out = os.str();
    CHECK(out.rfind("kind,index,x,value", 0) == 0);
    CHECK(out.find("truth,") != std::string::npos);
    CHECK(out.find("mean,") != std::string::npos);
    CHECK(out.find("draw_distance,") != std::string::npos);
}

TEST_CASE("built-in suites enumerate kernels, schemes and sample sizes") {
    auto suite = table1_suite(1, 5);
    // 2 schemes x 2 kernels x 4 sample sizes
    CHECK(suite.size() == 16);
    bool has_large = false;
    for (const auto& c : suite) {
        CHECK(c.m == 100);
        CHECK(c.replicates == 5);
        CHECK((c.N % c.m) == 0);
        if (c.N == 50000) has_large = true;
    }
    CHECK_FALSE(has_large);
    CHECK(table1_suite(1, 5, true).size() == 20);
}
