#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "dgp/spectral.hpp"

namespace dgp {

struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Covariance kernel on [0,1]^d.
//   Matern12:   k(x,y) = exp(-|x-y| / lengthscale)
//   SquaredExp: k(x,y) = exp(-|x-y|^2 * tau / 2)
//   Series:     k(x,y) = sum_{j <= basis_terms per axis} mu_j psi_j(x) psi_j(y)
// with psi_j(t) = prod_k sqrt(2) cos(pi (j_k - 1/2) t_k).
struct KernelSpec {
    enum class Kind { Matern12, SquaredExp, Series };

    Kind kind = Kind::Matern12;
    int dim = 1;
    double lengthscale = 1.0;  // Matern12
    double tau = 1.0;          // SquaredExp
    EigenProfile profile;      // Series
    long basis_terms = 0;      // Series, per axis

    static KernelSpec matern12(double lengthscale, int dim = 1);
    static KernelSpec squared_exp(double tau, int dim = 1);
    static KernelSpec series(EigenProfile profile, long basis_terms);

    void validate() const;
};

double eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Cross-Gram matrix, entry (i,j) = k(X_i, Y_j). Rows are points.
Eigen::MatrixXd gram(const KernelSpec& spec, const Eigen::MatrixXd& X,
                     const Eigen::MatrixXd& Y);

// Matern smoothness matched to a target regularity: beta - 1/2.
double matern_regularity_for(double beta);

// Squared-exponential rescaling parameter: 10 * N^{1/(1+2*beta)}.
double tau_for(long N, double beta);

void to_json(nlohmann::json& j, const KernelSpec& spec);
void from_json(const nlohmann::json& j, KernelSpec& spec);
void to_json(nlohmann::json& j, const EigenProfile& p);
void from_json(const nlohmann::json& j, EigenProfile& p);

}  // namespace dgp
