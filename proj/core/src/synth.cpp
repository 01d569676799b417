#include "dgp/synth.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "dgp/rng.hpp"

namespace dgp {

TruthSpec TruthSpec::paper_f0(long terms) {
    if (terms < 3) throw ConfigError("TruthSpec: paper truth needs terms >= 3");
    TruthSpec t;
    t.kind = Kind::PaperF0;
    t.terms = terms;
    return t;
}

TruthSpec TruthSpec::series(TruthCoefficients coeffs) {
    TruthSpec t;
    t.kind = Kind::SeriesTruth;
    t.coeffs = std::move(coeffs);
    return t;
}

TruthSpec TruthSpec::zero() { return TruthSpec{}; }

TruthCoefficients TruthSpec::coefficients() const {
    switch (kind) {
        case Kind::Zero:
            return TruthCoefficients{};
        case Kind::SeriesTruth:
            return coeffs;
        case Kind::PaperF0: {
            TruthCoefficients t;
            t.smoothness_beta = 1.0;  // lies in every class beta < 1
            for (long i = 3; i <= terms; ++i)
                t.coeffs.emplace_back(
                    MultiIndex{i},
                    std::sin(static_cast<double>(i)) *
                        std::pow(static_cast<double>(i), -1.5));
            return t;
        }
    }
    return {};
}

namespace {

double eval_series(const TruthCoefficients& coeffs, double x) {
    double v = 0.0;
    for (const auto& [j, f] : coeffs.coeffs) {
        if (j.size() != 1)
            throw ConfigError("f0_eval: univariate truth expected");
        v += f * std::sqrt(2.0) * std::cos(M_PI * (static_cast<double>(j[0]) - 0.5) * x);
    }
    return v;
}

}  // namespace

double f0_eval(const TruthSpec& spec, double x) {
    if (x < 0.0 || x > 1.0) throw DomainError("f0_eval: x outside [0,1]");
    if (spec.kind == TruthSpec::Kind::Zero) return 0.0;
    return eval_series(spec.coefficients(), x);
}

Eigen::VectorXd f0_on_points(const TruthSpec& spec, const Eigen::MatrixXd& points) {
    if (spec.kind == TruthSpec::Kind::Zero)
        return Eigen::VectorXd::Zero(points.rows());
    if (points.cols() != 1) throw ConfigError("f0_on_points: truth is univariate");
    const TruthCoefficients coeffs = spec.coefficients();
    Eigen::VectorXd v(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const double x = points(i, 0);
        if (x < 0.0 || x > 1.0) throw DomainError("f0_on_points: x outside [0,1]");
        v[i] = eval_series(coeffs, x);
    }
    return v;
}

SyntheticDataset generate(long N, const TruthSpec& truth, double sigma2,
                          std::uint64_t seed, int d) {
    if (N < 1) throw ConfigError("generate: N must be >= 1");
    if (sigma2 < 0) throw ConfigError("generate: sigma2 must be nonnegative");
    SyntheticDataset ds;
    ds.sigma2 = sigma2;
    ds.seed = seed;
    ds.truth = truth;
    ds.X.resize(N, d);
    ds.Y.resize(N);

    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (long i = 0; i < N; ++i)
        for (int k = 0; k < d; ++k) ds.X(i, k) = unif(rng);
    const double sd = std::sqrt(sigma2);
    Eigen::VectorXd f = f0_on_points(truth, ds.X);
    for (long i = 0; i < N; ++i) ds.Y[i] = f[i] + sd * normal(rng);
    return ds;
}

namespace {

template <typename T>
void write_le(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void save_binary(const SyntheticDataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_binary: cannot open " + path);
    write_le<std::uint64_t>(os, static_cast<std::uint64_t>(ds.X.rows()));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.X.cols()));
    write_le<double>(os, ds.sigma2);
    write_le<std::uint64_t>(os, ds.seed);
    for (Eigen::Index i = 0; i < ds.X.rows(); ++i)
        for (Eigen::Index k = 0; k < ds.X.cols(); ++k) write_le<double>(os, ds.X(i, k));
    for (Eigen::Index i = 0; i < ds.Y.size(); ++i) write_le<double>(os, ds.Y[i]);
}

SyntheticDataset load_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_binary: cannot open " + path);
    SyntheticDataset ds;
    const auto N = static_cast<Eigen::Index>(read_le<std::uint64_t>(is));
    const auto d = static_cast<Eigen::Index>(read_le<std::uint32_t>(is));
    ds.sigma2 = read_le<double>(is);
    ds.seed = read_le<std::uint64_t>(is);
    ds.X.resize(N, d);
    ds.Y.resize(N);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index k = 0; k < d; ++k) ds.X(i, k) = read_le<double>(is);
    for (Eigen::Index i = 0; i < N; ++i) ds.Y[i] = read_le<double>(is);
    if (!is) throw std::runtime_error("load_binary: truncated file " + path);
    return ds;
}

void save_csv(const SyntheticDataset& ds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_csv: cannot open " + path);
    for (Eigen::Index k = 0; k < ds.X.cols(); ++k) os << "x" << k << ",";
    os << "y\n";
    char buf[64];
    for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
        for (Eigen::Index k = 0; k < ds.X.cols(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g,", ds.X(i, k));
            os << buf;
        }
        std::snprintf(buf, sizeof(buf), "%.17g\n", ds.Y[i]);
        os << buf;
    }
}

}  // namespace dgp
