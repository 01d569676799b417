#pragma once

#include <string>

#include "dgp/gp.hpp"
#include "dgp/spectral.hpp"

namespace dgp {

// True regression function used to generate synthetic data.
//   PaperF0:     f0(x) = sum_{i=3..terms} sin(i) i^{-3/2} sqrt(2) cos(pi(i-1/2)x)
//   SeriesTruth: arbitrary coefficients on the same cosine basis
//   Zero:        f0 = 0
struct TruthSpec {
    enum class Kind { PaperF0, SeriesTruth, Zero };

    Kind kind = Kind::Zero;
    long terms = 200;           // PaperF0 truncation
    TruthCoefficients coeffs;   // SeriesTruth

    static TruthSpec paper_f0(long terms = 200);
    static TruthSpec series(TruthCoefficients coeffs);
    static TruthSpec zero();

    // Coefficients in the cosine basis (PaperF0 and SeriesTruth).
    TruthCoefficients coefficients() const;
};

double f0_eval(const TruthSpec& spec, double x);
Eigen::VectorXd f0_on_points(const TruthSpec& spec, const Eigen::MatrixXd& points);

struct SyntheticDataset {
    Eigen::MatrixXd X;  // N x d
    Eigen::VectorXd Y;
    double sigma2 = 1.0;
    std::uint64_t seed = 0;
    TruthSpec truth;
};

// X ~ U[0,1]^N, Y = f0(X) + N(0, sigma2), all from one seeded stream.
SyntheticDataset generate(long N, const TruthSpec& truth, double sigma2,
                          std::uint64_t seed, int d = 1);

// Flat binary format: header (N:u64, d:u32, sigma2:f64, seed:u64, all
// little-endian), then X row-major f64 LE, then Y f64 LE.
void save_binary(const SyntheticDataset& ds, const std::string& path);
SyntheticDataset load_binary(const std::string& path);
void save_csv(const SyntheticDataset& ds, const std::string& path);

}  // namespace dgp
