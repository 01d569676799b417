#include "dgp/distributed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace dgp {

const char* scheme_name(SchemeId s) {
    switch (s) {
        case SchemeId::Naive: return "naive";
        case SchemeId::MethodI: return "method1";
        case SchemeId::MethodII: return "method2";
    }
    return "?";
}

SchemeId scheme_from_name(const std::string& name) {
    if (name == "naive") return SchemeId::Naive;
    if (name == "method1") return SchemeId::MethodI;
    if (name == "method2") return SchemeId::MethodII;
    throw ConfigError("unknown scheme '" + name + "'");
}

std::vector<Shard> shard(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, int m,
                         Rng& rng) {
    const Eigen::Index N = X.rows();
    if (m < 1) throw ConfigError("shard: m must be >= 1");
    if (N != Y.size()) throw ConfigError("shard: X/Y size mismatch");
    if (N % m != 0) throw ConfigError("shard: N mod m must be 0");

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(N));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    const Eigen::Index n = N / m;
    std::vector<Shard> shards(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        Shard& s = shards[static_cast<std::size_t>(k)];
        s.worker_id = k;
        s.X.resize(n, X.cols());
        s.Y.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index src = perm[static_cast<std::size_t>(k * n + i)];
            s.X.row(i) = X.row(src);
            s.Y[i] = Y[src];
        }
    }
    return shards;
}

GridPosterior local_posterior(SchemeId scheme, const KernelSpec& spec, const Shard& sh,
                              double sigma2, int m, const GridSpec& grid) {
    if (sh.X.rows() == 0) throw ConfigError("local_posterior: empty shard");
    switch (scheme) {
        case SchemeId::Naive:
            return exact_posterior(spec, sh.X, sh.Y, sigma2, grid, 1.0);
        case SchemeId::MethodI:
            return exact_posterior(spec, sh.X, sh.Y, sigma2, grid, static_cast<double>(m));
        case SchemeId::MethodII:
            return exact_posterior(spec, sh.X, sh.Y, sigma2 / m, grid, 1.0);
    }
    throw ConfigError("local_posterior: bad scheme");
}

namespace {

// Symmetric PSD square root, eigenvalues clamped at zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success)
        throw NumericalError("psd_sqrt: eigendecomposition failed");
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

}  // namespace

Eigen::MatrixXd gaussian_barycenter(const std::vector<Eigen::MatrixXd>& covs,
                                    const BarycenterOptions& opts, int* iters_out,
                                    double* residual_out,
                                    std::vector<double>* residual_history) {
    if (covs.empty()) throw ConfigError("gaussian_barycenter: no covariances");
    const Eigen::Index G = covs.front().rows();
    const double m = static_cast<double>(covs.size());

    if (covs.size() == 1) {
        // the barycenter of a single measure is that measure
        if (iters_out) *iters_out = 0;
        if (residual_out) *residual_out = 0.0;
        return 0.5 * (covs.front() + covs.front().transpose());
    }

    Eigen::MatrixXd mean_cov = Eigen::MatrixXd::Zero(G, G);
    for (const auto& C : covs) mean_cov += C;
    mean_cov /= m;

    // Restrict to the numerically meaningful support: the range of the
    // average covariance contains the range of every C_k.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> mes(mean_cov);
    if (mes.info() != Eigen::Success)
        throw NumericalError("gaussian_barycenter: eigendecomposition failed");
    const double lambda_max = mes.eigenvalues().maxCoeff();
    if (lambda_max <= 0.0) return Eigen::MatrixXd::Zero(G, G);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < G; ++i)
        if (mes.eigenvalues()[i] > opts.support_cut * lambda_max) ++r;
    const Eigen::MatrixXd V = mes.eigenvectors().rightCols(r);  // ascending order

    std::vector<Eigen::MatrixXd> reduced;
    reduced.reserve(covs.size());
    for (const auto& C : covs) {
        Eigen::MatrixXd R = V.transpose() * C * V;
        reduced.push_back(0.5 * (R + R.transpose()));
    }

    Eigen::MatrixXd S = Eigen::MatrixXd(mes.eigenvalues().tail(r).asDiagonal());

    int iters = 0;
    double residual = 0.0;
    for (; iters < opts.max_iters; ++iters) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
        if (es.info() != Eigen::Success)
            throw NumericalError("gaussian_barycenter: eigendecomposition failed");
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
        const double floor = 1e-14 * ev.maxCoeff();
        Eigen::VectorXd half = ev.cwiseSqrt();
        Eigen::VectorXd inv_half(ev.size());
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            inv_half[i] = ev[i] > floor ? 1.0 / half[i] : 0.0;
        const Eigen::MatrixXd& U = es.eigenvectors();
        Eigen::MatrixXd S_half = U * half.asDiagonal() * U.transpose();
        Eigen::MatrixXd S_inv_half = U * inv_half.asDiagonal() * U.transpose();

        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(r, r);
        for (const auto& C : reduced) T += psd_sqrt(S_half * C * S_half);
        T /= m;

        Eigen::MatrixXd S_next = S_inv_half * T * T * S_inv_half;
        S_next = 0.5 * (S_next + S_next.transpose()).eval();

        residual = (S_next - S).norm() / std::max(S_next.norm(), 1e-300);
        if (residual_history) residual_history->push_back(residual);
        S = std::move(S_next);
        if (residual < opts.tol) {
            ++iters;
            break;
        }
    }
    if (residual >= opts.tol && opts.tol > 0)
        throw NumericalError("gaussian_barycenter: no convergence, residual " +
                             std::to_string(residual));
    if (iters_out) *iters_out = iters;
    if (residual_out) *residual_out = residual;
    Eigen::MatrixXd full = V * S * V.transpose();
    return 0.5 * (full + full.transpose());
}

AggregatedPosterior aggregate(SchemeId scheme, const std::vector<GridPosterior>& locals,
                              Rng&, const BarycenterOptions& opts) {
    if (locals.empty()) throw ConfigError("aggregate: no local posteriors");
    const Eigen::Index G = locals.front().mean.size();
    const double m = static_cast<double>(locals.size());
    for (const auto& lp : locals)
        if (lp.mean.size() != G) throw ConfigError("aggregate: grid mismatch");

    AggregatedPosterior out;
    out.scheme = scheme;
    out.grid = locals.front().grid;
    out.local_count = static_cast<int>(locals.size());

    out.mean = Eigen::VectorXd::Zero(G);
    for (const auto& lp : locals) out.mean += lp.mean;
    out.mean /= m;

    if (scheme == SchemeId::MethodII) {
        if (opts.variance_only) {
            Eigen::VectorXd var = Eigen::VectorXd::Zero(G);
            for (const auto& lp : locals) var += lp.cov.diagonal();
            out.cov = (var / m).asDiagonal();
        } else {
            std::vector<Eigen::MatrixXd> covs;
            covs.reserve(locals.size());
            for (const auto& lp : locals) {
                Eigen::MatrixXd C = lp.cov;
                // inverse square roots appear in the iteration
                C.diagonal().array() += 1e-10 * C.trace() / static_cast<double>(G);
                covs.push_back(std::move(C));
            }
            int iters = 0;
            double residual = 0.0;
            out.cov = gaussian_barycenter(covs, opts, &iters, &residual);
            out.barycenter_iters = iters;
            out.barycenter_residual = residual;
        }
    } else {
        // distribution of the average of one draw per local posterior
        out.cov = Eigen::MatrixXd::Zero(G, G);
        for (const auto& lp : locals) out.cov += lp.cov;
        out.cov /= m * m;
    }
    return out;
}

AggregatedPosterior run_scheme(SchemeId scheme, const KernelSpec& spec,
                               const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                               double sigma2, int m, const GridSpec& grid, Rng& rng,
                               const BarycenterOptions& opts) {
    std::vector<Shard> shards = shard(X, Y, m, rng);
    std::vector<GridPosterior> locals(shards.size());

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(shards.size()));
    if (workers <= 1) {
        for (std::size_t k = 0; k < shards.size(); ++k)
            locals[k] = local_posterior(scheme, spec, shards[k], sigma2, m, grid);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(workers);
        for (unsigned t = 0; t < workers; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t k = next++; k < shards.size(); k = next++)
                        locals[k] = local_posterior(scheme, spec, shards[k], sigma2, m, grid);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    return aggregate(scheme, locals, rng, opts);
}

}  // namespace dgp
