#include "dgp/credible.hpp"

#include <algorithm>
#include <cmath>

namespace dgp {

CredibleBall radius(const AggregatedPosterior& post, double gamma, int draws, Rng& rng,
                    double inflation) {
    if (gamma <= 0.0 || gamma >= 1.0) throw ConfigError("radius: gamma must be in (0,1)");
    if (draws < 100) throw ConfigError("radius: need at least 100 draws");

    CredibleBall ball;
    ball.center = post.mean;
    ball.gamma = gamma;
    ball.inflation = inflation;
    ball.draws_used = draws;

    GridPosterior gp;
    gp.grid = post.grid;
    gp.mean = post.mean;
    gp.cov = post.cov;
    Eigen::MatrixXd d = sample(gp, rng, draws);

    std::vector<double> dist(static_cast<std::size_t>(draws));
    for (int i = 0; i < draws; ++i)
        dist[static_cast<std::size_t>(i)] =
            l2_norm(post.grid, (d.row(i).transpose() - post.mean).eval());
    std::sort(dist.begin(), dist.end());

    // nearest-rank quantile: smallest r with #{dist <= r} >= (1-gamma)*draws
    const auto rank = static_cast<std::size_t>(
        std::ceil((1.0 - gamma) * static_cast<double>(draws)));
    ball.radius = dist[std::min(rank, dist.size()) - 1];
    return ball;
}

bool covered(const CredibleBall& ball, const Eigen::VectorXd& truth_on_grid,
             const GridSpec& grid) {
    if (truth_on_grid.size() != ball.center.size())
        throw ConfigError("covered: length mismatch");
    const double dist = l2_norm(grid, (truth_on_grid - ball.center).eval());
    return dist <= ball.inflation * ball.radius;
}

}  // namespace dgp
