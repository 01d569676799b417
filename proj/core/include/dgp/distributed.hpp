#pragma once

#include <optional>
#include <vector>

#include "dgp/gp.hpp"

namespace dgp {

struct Shard {
    int worker_id = 0;
    Eigen::MatrixXd X;
    Eigen::VectorXd Y;
};

enum class SchemeId { Naive, MethodI, MethodII };

const char* scheme_name(SchemeId s);
SchemeId scheme_from_name(const std::string& name);

struct BarycenterOptions {
    double tol = 1e-8;      // relative Frobenius residual
    int max_iters = 200;
    // The iteration runs inside the dominant eigenspace of the average
    // covariance; directions with average eigenvalue below
    // support_cut * lambda_max are treated as zero. The inverse square
    // root in the fixed-point map would otherwise amplify eigen-noise in
    // those directions and stall the residual.
    double support_cut = 1e-7;
    // Replace the Method II covariance by the diagonal average of the
    // local variance functions instead of the full barycenter.
    bool variance_only = false;
};

struct AggregatedPosterior {
    SchemeId scheme = SchemeId::Naive;
    GridSpec grid;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    int local_count = 0;
    std::optional<int> barycenter_iters;
    std::optional<double> barycenter_residual;
};

// Random permutation, then contiguous blocks of size N/m. Requires
// N mod m = 0.
std::vector<Shard> shard(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, int m,
                         Rng& rng);

// Local adjusted posterior for one shard:
//   Naive    -> plain posterior (scale 1, noise sigma2)
//   MethodI  -> prior rescaled K -> m*K   (scale m, noise sigma2)
//   MethodII -> likelihood power m        (scale 1, noise sigma2/m)
GridPosterior local_posterior(SchemeId scheme, const KernelSpec& spec, const Shard& shard,
                              double sigma2, int m, const GridSpec& grid);

// Combine local posteriors. Mean is the arithmetic average for every
// scheme. Covariance: Naive/MethodI average independent local draws
// (cov = m^-2 sum C_k); MethodII takes the Gaussian 2-Wasserstein
// barycenter of the locals.
AggregatedPosterior aggregate(SchemeId scheme, const std::vector<GridPosterior>& locals,
                              Rng& rng, const BarycenterOptions& opts = {});

// shard -> local_posterior per worker -> aggregate.
AggregatedPosterior run_scheme(SchemeId scheme, const KernelSpec& spec,
                               const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                               double sigma2, int m, const GridSpec& grid, Rng& rng,
                               const BarycenterOptions& opts = {});

// Unique PSD fixed point S of S = m^-1 sum_k (S^{1/2} C_k S^{1/2})^{1/2},
// by the fixed-point map S <- S^-1/2 (m^-1 sum_k (S^1/2 C_k S^1/2)^1/2)^2 S^-1/2.
Eigen::MatrixXd gaussian_barycenter(const std::vector<Eigen::MatrixXd>& covs,
                                    const BarycenterOptions& opts, int* iters_out = nullptr,
                                    double* residual_out = nullptr,
                                    std::vector<double>* residual_history = nullptr);

}  // namespace dgp
