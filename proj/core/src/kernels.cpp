#include "dgp/kernels.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

namespace dgp {

KernelSpec KernelSpec::matern12(double lengthscale, int dim) {
    KernelSpec s;
    s.kind = Kind::Matern12;
    s.lengthscale = lengthscale;
    s.dim = dim;
    s.validate();
    return s;
}

KernelSpec KernelSpec::squared_exp(double tau, int dim) {
    KernelSpec s;
    s.kind = Kind::SquaredExp;
    s.tau = tau;
    s.dim = dim;
    s.validate();
    return s;
}

KernelSpec KernelSpec::series(EigenProfile profile, long basis_terms) {
    KernelSpec s;
    s.kind = Kind::Series;
    s.dim = profile.dim;
    s.profile = std::move(profile);
    s.basis_terms = basis_terms;
    s.validate();
    return s;
}

void KernelSpec::validate() const {
    if (dim < 1) throw ConfigError("KernelSpec: dim must be >= 1");
    switch (kind) {
        case Kind::Matern12:
            if (lengthscale <= 0) throw ConfigError("KernelSpec: lengthscale must be positive");
            break;
        case Kind::SquaredExp:
            if (tau <= 0) throw ConfigError("KernelSpec: tau must be positive");
            break;
        case Kind::Series:
            profile.validate();
            if (profile.dim != dim) throw ConfigError("KernelSpec: profile dim mismatch");
            if (basis_terms < 1) throw ConfigError("KernelSpec: basis_terms must be >= 1");
            break;
    }
}

namespace {

void check_domain(const Eigen::VectorXd& x) {
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (x[i] < 0.0 || x[i] > 1.0)
            throw DomainError("kernel: point outside [0,1]^d");
}

void check_domain(const Eigen::MatrixXd& X) {
    if ((X.array() < 0.0).any() || (X.array() > 1.0).any())
        throw DomainError("kernel: point set outside [0,1]^d");
}

// Scaled eigenfeatures: row i holds sqrt(mu_j) * psi_j(X_i) over all
// multi-indices j with j_k <= terms, so Phi(X) Phi(Y)^T is the series
// Gram matrix.
Eigen::MatrixXd series_features(const KernelSpec& spec, const Eigen::MatrixXd& X) {
    const int d = spec.dim;
    const long terms = spec.basis_terms;
    long count = 1;
    for (int k = 0; k < d; ++k) count *= spec.profile.axis_limit(terms);
    const long per_axis = spec.profile.axis_limit(terms);

    // Per-axis factors: sqrt(2) cos(pi (j-1/2) x_k), cached per axis.
    const Eigen::Index n = X.rows();
    std::vector<Eigen::MatrixXd> axis_psi(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) {
        Eigen::MatrixXd psi(n, per_axis);
        for (long j = 1; j <= per_axis; ++j) {
            const double freq = M_PI * (static_cast<double>(j) - 0.5);
            psi.col(j - 1) =
                (std::sqrt(2.0) * (freq * X.col(k).array()).cos()).matrix();
        }
        axis_psi[static_cast<std::size_t>(k)] = std::move(psi);
    }

    Eigen::MatrixXd phi(n, count);
    MultiIndex j(static_cast<std::size_t>(d), 1);
    for (long col = 0; col < count; ++col) {
        double mu = 1.0;
        for (int k = 0; k < d; ++k) mu *= spec.profile.axis_eigenvalue(j[static_cast<std::size_t>(k)]);
        Eigen::VectorXd v = axis_psi[0].col(j[0] - 1);
        for (int k = 1; k < d; ++k)
            v = v.cwiseProduct(axis_psi[static_cast<std::size_t>(k)].col(j[static_cast<std::size_t>(k)] - 1));
        phi.col(col) = std::sqrt(mu) * v;
        // advance multi-index, first axis fastest
        for (int k = 0; k < d; ++k) {
            if (++j[static_cast<std::size_t>(k)] <= per_axis) break;
            j[static_cast<std::size_t>(k)] = 1;
        }
    }
    return phi;
}

}  // namespace

double eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    spec.validate();
    if (x.size() != spec.dim || y.size() != spec.dim)
        throw ConfigError("kernel eval: point dimension mismatch");
    check_domain(x);
    check_domain(y);
    switch (spec.kind) {
        case KernelSpec::Kind::Matern12:
            return std::exp(-(x - y).norm() / spec.lengthscale);
        case KernelSpec::Kind::SquaredExp:
            return std::exp(-(x - y).squaredNorm() * spec.tau / 2.0);
        case KernelSpec::Kind::Series: {
            Eigen::MatrixXd X = x.transpose();
            Eigen::MatrixXd Y = y.transpose();
            return (series_features(spec, X) * series_features(spec, Y).transpose())(0, 0);
        }
    }
    return 0.0;
}

Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& X,
                     const Eigen::MatrixXd& Y) {
    spec.validate();
    if (X.rows() > 0 && X.cols() != spec.dim)
        throw ConfigError("gram: X dimension mismatch");
    if (Y.rows() > 0 && Y.cols() != spec.dim)
        throw ConfigError("gram: Y dimension mismatch");
    check_domain(X);
    check_domain(Y);
    const Eigen::Index n = X.rows(), np = Y.rows();
    if (n == 0 || np == 0) return Eigen::MatrixXd(n, np);

    switch (spec.kind) {
        case KernelSpec::Kind::Matern12: {
            Eigen::MatrixXd K(n, np);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < np; ++j)
                    K(i, j) = std::exp(-(X.row(i) - Y.row(j)).norm() / spec.lengthscale);
            return K;
        }
        case KernelSpec::Kind::SquaredExp: {
            Eigen::VectorXd xx = X.rowwise().squaredNorm();
            Eigen::VectorXd yy = Y.rowwise().squaredNorm();
            Eigen::MatrixXd d2 = xx.replicate(1, np) + yy.transpose().replicate(n, 1) -
                                 2.0 * X * Y.transpose();
            return (-d2.array().max(0.0) * spec.tau / 2.0).exp().matrix();
        }
        case KernelSpec::Kind::Series:
            return series_features(spec, X) * series_features(spec, Y).transpose();
    }
    return Eigen::MatrixXd();
}

double matern_regularity_for(double beta) {
    if (beta <= 0.5)
        throw ConfigError("matern_regularity_for: beta must exceed 1/2");
    return beta - 0.5;
}

double tau_for(long N, double beta) {
    if (N < 1) throw ConfigError("tau_for: N must be >= 1");
    if (beta <= 0) throw ConfigError("tau_for: beta must be positive");
    return 10.0 * std::pow(static_cast<double>(N), 1.0 / (1.0 + 2.0 * beta));
}

void to_json(nlohmann::json& j, const EigenProfile& p) {
    j = nlohmann::json{{"dim", p.dim}};
    switch (p.kind) {
        case EigenProfile::Kind::Polynomial:
            j["kind"] = "polynomial";
            j["alpha"] = p.alpha;
            j["c"] = p.c;
            break;
        case EigenProfile::Kind::Exponential:
            j["kind"] = "exponential";
            j["a"] = p.a;
            j["b"] = p.b;
            j["c"] = p.c;
            break;
        case EigenProfile::Kind::Explicit:
            j["kind"] = "explicit";
            j["values"] = p.values;
            break;
    }
}

void from_json(const nlohmann::json& j, EigenProfile& p) {
    const std::string kind = j.at("kind").get<std::string>();
    const int dim = j.value("dim", 1);
    if (kind == "polynomial")
        p = EigenProfile::polynomial(j.at("alpha").get<double>(), dim, j.value("c", 1.0));
    else if (kind == "exponential")
        p = EigenProfile::exponential(j.at("a").get<double>(), j.value("b", 1.0), dim,
                                      j.value("c", 1.0));
    else if (kind == "explicit")
        p = EigenProfile::explicit_values(j.at("values").get<std::vector<double>>(), dim);
    else
        throw ConfigError("EigenProfile: unknown kind '" + kind + "'");
}

void to_json(nlohmann::json& j, const KernelSpec& spec) {
    j = nlohmann::json{{"dim", spec.dim}};
    switch (spec.kind) {
        case KernelSpec::Kind::Matern12:
            j["kind"] = "matern12";
            j["lengthscale"] = spec.lengthscale;
            break;
        case KernelSpec::Kind::SquaredExp:
            j["kind"] = "sqexp";
            j["tau"] = spec.tau;
            break;
        case KernelSpec::Kind::Series:
            j["kind"] = "series";
            j["profile"] = spec.profile;
            j["basis_terms"] = spec.basis_terms;
            break;
    }
}

void from_json(const nlohmann::json& j, KernelSpec& spec) {
    const std::string kind = j.at("kind").get<std::string>();
    const int dim = j.value("dim", 1);
    if (kind == "matern12")
        spec = KernelSpec::matern12(j.value("lengthscale", 1.0), dim);
    else if (kind == "sqexp")
        spec = KernelSpec::squared_exp(j.at("tau").get<double>(), dim);
    else if (kind == "series")
        spec = KernelSpec::series(j.at("profile").get<EigenProfile>(),
                                  j.at("basis_terms").get<long>());
    else
        throw ConfigError("KernelSpec: unknown kind '" + kind + "'");
}

}  // namespace dgp
