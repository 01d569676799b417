#include "dgp/gp.hpp"

#include <cmath>

namespace dgp {

GridSpec GridSpec::uniform(int G) {
    if (G < 1) throw ConfigError("GridSpec: G must be >= 1");
    GridSpec g;
    g.points.resize(G, 1);
    for (int i = 0; i < G; ++i) g.points(i, 0) = (i + 0.5) / G;
    g.weight = 1.0 / G;
    return g;
}

void GridSpec::validate() const {
    if (points.rows() < 1) throw ConfigError("GridSpec: empty grid");
    if (weight <= 0) throw ConfigError("GridSpec: weight must be positive");
    if (dim() == 1)
        for (Eigen::Index i = 1; i < points.rows(); ++i)
            if (points(i, 0) <= points(i - 1, 0))
                throw ConfigError("GridSpec: 1-d grid must be strictly increasing");
}

Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(const Eigen::MatrixXd& A) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return llt;
    const double n = static_cast<double>(A.rows());
    const double base = A.trace() / n;
    double jitter = 1e-10 * base;
    const double max_jitter = 1e-4 * base;
    while (jitter <= max_jitter) {
        llt.compute(A + jitter * Eigen::MatrixXd::Identity(A.rows(), A.cols()));
        if (llt.info() == Eigen::Success) return llt;
        jitter *= 10.0;
    }
    throw NumericalError("cholesky_with_jitter: factorization failed", jitter / 10.0);
}

GridPosterior exact_posterior(const KernelSpec& spec, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& Y, double noise_var,
                              const GridSpec& grid, double kernel_scale) {
    grid.validate();
    if (noise_var <= 0) throw ConfigError("exact_posterior: noise_var must be positive");
    if (kernel_scale <= 0) throw ConfigError("exact_posterior: kernel_scale must be positive");
    if (X.rows() != Y.size()) throw ConfigError("exact_posterior: X/Y size mismatch");

    GridPosterior post;
    post.grid = grid;
    const Eigen::Index n = X.rows();
    const double s = kernel_scale;

    Eigen::MatrixXd Kgg = s * gram(spec, grid.points, grid.points);
    if (n == 0) {
        post.mean = Eigen::VectorXd::Zero(grid.size());
        post.cov = std::move(Kgg);
        return post;
    }

    Eigen::MatrixXd A = s * gram(spec, X, X);
    A.diagonal().array() += noise_var;
    auto llt = cholesky_with_jitter(A);

    Eigen::MatrixXd Kgx = s * gram(spec, grid.points, X);
    post.mean = Kgx * llt.solve(Y);
    post.cov = Kgg - Kgx * llt.solve(Kgx.transpose());
    post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
    // round-off can push the diagonal slightly negative
    post.cov.diagonal() = post.cov.diagonal().cwiseMax(0.0);
    return post;
}

Eigen::MatrixXd sample(const GridPosterior& post, Rng& rng, int count) {
    if (count < 1) throw ConfigError("sample: count must be >= 1");
    const Eigen::Index G = post.mean.size();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(post.cov);
    if (es.info() != Eigen::Success)
        throw NumericalError("sample: eigendecomposition failed");
    Eigen::VectorXd sqrt_ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd L = es.eigenvectors() * sqrt_ev.asDiagonal();

    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd Z(count, G);
    for (int i = 0; i < count; ++i)
        for (Eigen::Index j = 0; j < G; ++j) Z(i, j) = normal(rng);
    Eigen::MatrixXd draws = Z * L.transpose();
    draws.rowwise() += post.mean.transpose();
    return draws;
}

double l2_norm(const GridSpec& grid, const Eigen::VectorXd& values) {
    if (values.size() != grid.size())
        throw ConfigError("l2_norm: length mismatch");
    return std::sqrt(grid.weight * values.squaredNorm());
}

}  // namespace dgp
