#pragma once

#include "dgp/distributed.hpp"

namespace dgp {

// Monte-Carlo L2 credible ball around an aggregated posterior mean.
struct CredibleBall {
    Eigen::VectorXd center;
    double radius = 0.0;
    double gamma = 0.05;
    double inflation = 1.0;  // blow-up factor L
    int draws_used = 0;
};

// Empirical (1-gamma) quantile (nearest rank) of the L2 distance of
// posterior draws to the posterior mean.
CredibleBall radius(const AggregatedPosterior& post, double gamma, int draws, Rng& rng,
                    double inflation = 1.0);

// True iff ||truth - center||_2 <= inflation * radius (boundary inclusive).
bool covered(const CredibleBall& ball, const Eigen::VectorXd& truth_on_grid,
             const GridSpec& grid);

}  // namespace dgp
