#pragma once

#include <Eigen/Dense>

#include "dgp/kernels.hpp"
#include "dgp/rng.hpp"

namespace dgp {

struct NumericalError : std::runtime_error {
    double final_jitter = 0.0;
    explicit NumericalError(const std::string& what, double jitter = 0.0)
        : std::runtime_error(what), final_jitter(jitter) {}
};

// Evaluation grid on [0,1]^d with a uniform quadrature weight; the
// discrete L2 norm is sqrt(weight * sum v_i^2).
struct GridSpec {
    Eigen::MatrixXd points;  // G x d
    double weight = 1.0;

    // G midpoints (i+1/2)/G on [0,1]; midpoints make the half-shifted
    // cosine basis exactly orthogonal in the discrete inner product.
    static GridSpec uniform(int G);

    Eigen::Index size() const { return points.rows(); }
    int dim() const { return static_cast<int>(points.cols()); }
    void validate() const;
};

// A Gaussian posterior discretized on a grid.
struct GridPosterior {
    GridSpec grid;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// Exact GP regression posterior on the grid. kernel_scale multiplies
// every kernel evaluation (prior rescaling K -> s*K). The regularized
// Gram matrix is factorized by Cholesky with an adaptive jitter ladder;
// no explicit inverse is formed.
GridPosterior exact_posterior(const KernelSpec& spec, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& Y, double noise_var,
                              const GridSpec& grid, double kernel_scale = 1.0);

// count i.i.d. draws (rows) mean + L z with L a PSD eigen-factor of cov;
// negative eigenvalues from round-off are clamped to zero.
Eigen::MatrixXd sample(const GridPosterior& post, Rng& rng, int count);

double l2_norm(const GridSpec& grid, const Eigen::VectorXd& values);

// Cholesky of A + jitter*I, escalating jitter from 1e-10*trace/n by
// factors of 10 up to 1e-4*trace/n before giving up.
Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(const Eigen::MatrixXd& A);

}  // namespace dgp
