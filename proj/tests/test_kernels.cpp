#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <random>

#include "dgp/gp.hpp"
#include "dgp/kernels.hpp"
#include "dgp/rng.hpp"

using namespace dgp;

namespace {

Eigen::VectorXd vec1(double x) {
    Eigen::VectorXd v(1);
    v << x;
    return v;
}

Eigen::MatrixXd random_points(int n, int d, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::MatrixXd X(n, d);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < d; ++k) X(i, k) = unif(rng);
    return X;
}

// Independent per-entry oracle for the series kernel.
double series_oracle(const EigenProfile& p, long terms, double x, double y) {
    double s = 0.0;
    for (long j = 1; j <= terms; ++j) {
        const double w = M_PI * (static_cast<double>(j) - 0.5);
        s += p.axis_eigenvalue(j) * 2.0 * std::cos(w * x) * std::cos(w * y);
    }
    return s;
}

}  // namespace

TEST_CASE("eval at coincident points") {
    CHECK(eval(KernelSpec::matern12(1.0), vec1(0.3), vec1(0.3)) == doctest::Approx(1.0));
    CHECK(eval(KernelSpec::squared_exp(5.0), vec1(0.7), vec1(0.7)) == doctest::Approx(1.0));
    // series kernel at x = y = 0: sum mu_j * 2 cos(0)^2 = 2 sum mu_j
    auto series = KernelSpec::series(EigenProfile::explicit_values({1.0}), 1);
    CHECK(eval(series, vec1(0.0), vec1(0.0)) == doctest::Approx(2.0));
}

TEST_CASE("matern12 closed form") {
    auto spec = KernelSpec::matern12(1.0);
    CHECK(eval(spec, vec1(0.0), vec1(0.5)) == doctest::Approx(std::exp(-0.5)));
    CHECK(eval(spec, vec1(0.0), vec1(1.0)) == doctest::Approx(std::exp(-1.0)));
    auto half = KernelSpec::matern12(0.5);
    CHECK(eval(half, vec1(0.0), vec1(0.5)) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("squared exponential closed form") {
    auto spec = KernelSpec::squared_exp(2.0);
    CHECK(eval(spec, vec1(0.0), vec1(1.0)) == doctest::Approx(std::exp(-1.0)));
    CHECK(eval(spec, vec1(0.2), vec1(0.2)) == doctest::Approx(1.0));
}

TEST_CASE("stationarity within the domain") {
    Rng rng = make_rng(11);
    std::uniform_real_distribution<double> unif(0.0, 0.4);
    for (const auto& spec : {KernelSpec::matern12(0.7), KernelSpec::squared_exp(3.0)}) {
        for (int rep = 0; rep < 20; ++rep) {
            const double x = unif(rng), y = unif(rng), s = unif(rng);
            CHECK(eval(spec, vec1(x), vec1(y)) ==
                  doctest::Approx(eval(spec, vec1(x + s), vec1(y + s))).epsilon(1e-12));
        }
    }
}

TEST_CASE("domain check") {
    auto spec = KernelSpec::matern12(1.0);
    CHECK_THROWS_AS(eval(spec, vec1(-0.1), vec1(0.5)), DomainError);
    CHECK_THROWS_AS(eval(spec, vec1(0.5), vec1(1.1)), DomainError);
    CHECK_NOTHROW(eval(spec, vec1(0.0), vec1(1.0)));
}

TEST_CASE("gram symmetry and transpose identity") {
    Rng rng = make_rng(3);
    for (int d : {1, 3}) {
        Eigen::MatrixXd X = random_points(7, d, rng);
        Eigen::MatrixXd Y = random_points(5, d, rng);
        for (const auto& spec :
             {KernelSpec::matern12(1.0, d), KernelSpec::squared_exp(4.0, d)}) {
            Eigen::MatrixXd Kxx = gram(spec, X, X);
            CHECK((Kxx - Kxx.transpose()).cwiseAbs().maxCoeff() < 1e-14);
            Eigen::MatrixXd Kxy = gram(spec, X, Y);
            Eigen::MatrixXd Kyx = gram(spec, Y, X);
            CHECK((Kxy - Kyx.transpose()).cwiseAbs().maxCoeff() < 1e-14);
            // entries agree with eval
            for (int i = 0; i < 3; ++i)
                CHECK(Kxy(i, i) ==
                      doctest::Approx(eval(spec, X.row(i), Y.row(i))).epsilon(1e-14));
        }
    }
}

TEST_CASE("gram handles empty point sets") {
    auto spec = KernelSpec::matern12(1.0);
    Eigen::MatrixXd X(0, 1);
    Eigen::MatrixXd Y(4, 1);
    Y << 0.1, 0.3, 0.5, 0.9;
    CHECK(gram(spec, X, Y).rows() == 0);
    CHECK(gram(spec, X, Y).cols() == 4);
    CHECK(gram(spec, Y, X).cols() == 0);
}

TEST_CASE("all kernels give PSD gram matrices") {
    Rng rng = make_rng(99);
    auto series = KernelSpec::series(EigenProfile::polynomial(2.0), 500);
    std::vector<KernelSpec> specs{KernelSpec::matern12(1.0), KernelSpec::squared_exp(50.0),
                                  series};
    std::uniform_int_distribution<int> size(2, 64);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = size(rng);
        Eigen::MatrixXd X = random_points(n, 1, rng);
        for (const auto& spec : specs) {
            Eigen::MatrixXd K = gram(spec, X, X);
            // jittered Cholesky must succeed at the base rung scale
            Eigen::MatrixXd Kj = K + 1e-10 * K.trace() / n * Eigen::MatrixXd::Identity(n, n);
            Eigen::LLT<Eigen::MatrixXd> llt(Kj);
            CHECK(llt.info() == Eigen::Success);
        }
    }
}

TEST_CASE("series kernel matches brute-force eigen-expansion") {
    auto profile = EigenProfile::polynomial(1.5);
    const long terms = 2000;
    auto spec = KernelSpec::series(profile, terms);
    Rng rng = make_rng(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 30; ++rep) {
        const double x = unif(rng), y = unif(rng);
        const double want = series_oracle(profile, terms, x, y);
        CHECK(eval(spec, vec1(x), vec1(y)) == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("series kernel summation-order stability") {
    auto profile = EigenProfile::polynomial(1.0);
    const long terms = 10000;
    auto spec = KernelSpec::series(profile, terms);
    Rng rng = make_rng(17);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        const double x = unif(rng), y = unif(rng);
        // reverse-order (ascending magnitude) re-summation
        double rev = 0.0;
        for (long j = terms; j >= 1; --j) {
            const double w = M_PI * (static_cast<double>(j) - 0.5);
            rev += profile.axis_eigenvalue(j) * 2.0 * std::cos(w * x) * std::cos(w * y);
        }
        const double got = eval(spec, vec1(x), vec1(y));
        CHECK(std::abs(got - rev) <= 1e-10 * std::max(1.0, std::abs(rev)));
    }
}

TEST_CASE("matern regularity map") {
    CHECK(matern_regularity_for(1.0) == doctest::Approx(0.5));
    CHECK(matern_regularity_for(2.0) == doctest::Approx(1.5));
    CHECK_THROWS_AS(matern_regularity_for(0.5), ConfigError);
    CHECK_THROWS_AS(matern_regularity_for(0.2), ConfigError);
}

TEST_CASE("squared-exponential rescaling parameter") {
    CHECK(tau_for(1, 1.0) == doctest::Approx(10.0));
    CHECK(tau_for(1000, 1.0) == doctest::Approx(10.0 * std::pow(1000.0, 1.0 / 3.0)));
    CHECK(tau_for(20000, 1.0) > tau_for(500, 1.0));
}

TEST_CASE("validation rejects bad parameters") {
    CHECK_THROWS_AS(KernelSpec::matern12(0.0).validate(), ConfigError);
    CHECK_THROWS_AS(KernelSpec::matern12(-1.0).validate(), ConfigError);
    CHECK_THROWS_AS(KernelSpec::squared_exp(0.0).validate(), ConfigError);
    CHECK_NOTHROW(KernelSpec::matern12(1.0).validate());
    CHECK_THROWS_AS(KernelSpec::series(EigenProfile::polynomial(1.0), 0), ConfigError);
}

TEST_CASE("kernel spec json round trip") {
    for (const auto& spec :
         {KernelSpec::matern12(0.7, 2), KernelSpec::squared_exp(12.5),
          KernelSpec::series(EigenProfile::exponential(0.3, 2.0), 100)}) {
        nlohmann::json j = spec;
        auto back = j.get<KernelSpec>();
        CHECK(back.kind == spec.kind);
        CHECK(back.dim == spec.dim);
        CHECK(back.lengthscale == spec.lengthscale);
        CHECK(back.tau == spec.tau);
        CHECK(back.basis_terms == spec.basis_terms);
        CHECK(nlohmann::json(back).dump() == j.dump());
    }
}
