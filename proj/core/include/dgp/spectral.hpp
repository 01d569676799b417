#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dgp {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Eigenvalue decay profile of a covariance kernel, per axis.
// Polynomial: mu_i = c * i^{-1-2*alpha/d}
// Exponential: mu_i = c * b * exp(-a*i)
// Explicit: a finite descending positive sequence (d = 1 per axis).
// The d-dimensional eigenvalue of multi-index j is the product of the
// one-dimensional values along each coordinate.
struct EigenProfile {
    enum class Kind { Polynomial, Exponential, Explicit };

    Kind kind = Kind::Polynomial;
    int dim = 1;
    double alpha = 1.0;  // Polynomial
    double c = 1.0;      // Polynomial and Exponential scale
    double a = 1.0;      // Exponential
    double b = 1.0;      // Exponential
    std::vector<double> values;  // Explicit

    static EigenProfile polynomial(double alpha, int dim = 1, double c = 1.0);
    static EigenProfile exponential(double a, double b, int dim = 1, double c = 1.0);
    static EigenProfile explicit_values(std::vector<double> values, int dim = 1);

    // One-dimensional eigenvalue at 1-based axis index i.
    double axis_eigenvalue(long i) const;

    // Effective per-axis index cut given a requested truncation.
    long axis_limit(long truncation) const;

    void validate() const;
};

using MultiIndex = std::vector<long>;

// Kernel spectrum together with the sample size and noise level; all
// derived quantities (nu_j, bias, variance, delta_N) live here. Sums
// over multi-indices are truncated at `truncation` per axis.
struct SpectralModel {
    EigenProfile profile;
    double N = 1.0;
    double sigma2 = 1.0;
    long truncation = 1'000'000;

    static long default_truncation(int dim);

    SpectralModel() = default;
    SpectralModel(EigenProfile p, double N_, double sigma2_, long truncation_ = 0);

    double mu(const MultiIndex& j) const;
    void validate() const;

    // |{j : mu_j N >= sigma^2}| <= N, the mild spectral condition the
    // rate theory assumes. Configurations violating it are rejected by
    // theory reports.
    bool spectral_condition_holds() const;

    // Visit every multi-index within the truncation whose eigenvalue
    // passes the pruning cut mu_j*N >= 1e-16*sigma2 (colexicographic
    // order, subtree pruning along each axis).
    void for_each_index(const std::function<void(const MultiIndex&, double mu)>& fn) const;
};

// Series coefficients of the true regression function in the kernel
// eigenbasis (1-based multi-indices).
struct TruthCoefficients {
    enum class Basis { CosineHalfShift, Custom };

    Basis basis = Basis::CosineHalfShift;
    std::vector<std::pair<MultiIndex, double>> coeffs;
    double smoothness_beta = 1.0;

    double l2_norm_sq() const;
    // Sobolev-type norm: sum_j (sum_i j_i^2)^beta f_j^2
    double sobolev_norm_sq(double beta) const;

    // d=1 helper: f_j = scale * j^{-exponent} for j in [start, terms].
    static TruthCoefficients power_law(double exponent, long terms, long start = 1,
                                       double scale = 1.0, double beta = 1.0);
};

struct DeltaN {
    double value = 0.0;
    bool budget_exhausted = false;
};

struct CoverageRegime {
    enum class Kind { CoverageOne, CoverageZero, Indeterminate };
    Kind kind = Kind::Indeterminate;
    double ratio = 0.0;
};

// nu_j = mu_j*N / (sigma^2 + mu_j*N), the population posterior eigenvalue.
double nu(const SpectralModel& model, const MultiIndex& j);

// sum_j nu_j^k over the truncated index set.
double nu_power_sum(const SpectralModel& model, int k);

// Squared bias of the population posterior mean: sum_j (1-nu_j)^2 f_j^2.
double bias_sq(const SpectralModel& model, const TruthCoefficients& truth);

// Expected posterior variance proxy: (sigma^2/N) * sum_j nu_j.
double variance_proxy(const SpectralModel& model);

// Technical remainder: inf over index sets I of size <= n/(m*sum nu^2)
// of N * sum(nu^2) * sum_{l not in I} mu_l. The infimum is attained by
// keeping the largest eigenvalues, so a greedy nested search is exact.
DeltaN delta_N(const SpectralModel& model, long m);

// Classifies the bias/variance ratio r = (N/sigma^2)*bias_sq/sum(nu):
// r <= 1 -> CoverageOne, r >= 100 -> CoverageZero, else Indeterminate.
CoverageRegime coverage_regime(const SpectralModel& model, const TruthCoefficients& truth);

}  // namespace dgp
