#include "dgp/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dgp {

EigenProfile EigenProfile::polynomial(double alpha, int dim, double c) {
    EigenProfile p;
    p.kind = Kind::Polynomial;
    p.alpha = alpha;
    p.dim = dim;
    p.c = c;
    p.validate();
    return p;
}

EigenProfile EigenProfile::exponential(double a, double b, int dim, double c) {
    EigenProfile p;
    p.kind = Kind::Exponential;
    p.a = a;
    p.b = b;
    p.dim = dim;
    p.c = c;
    p.validate();
    return p;
}

EigenProfile EigenProfile::explicit_values(std::vector<double> values, int dim) {
    EigenProfile p;
    p.kind = Kind::Explicit;
    p.values = std::move(values);
    p.dim = dim;
    p.validate();
    return p;
}

double EigenProfile::axis_eigenvalue(long i) const {
    switch (kind) {
        case Kind::Polynomial:
            return c * std::pow(static_cast<double>(i), -1.0 - 2.0 * alpha / dim);
        case Kind::Exponential:
            return c * b * std::exp(-a * static_cast<double>(i));
        case Kind::Explicit:
            return values[static_cast<std::size_t>(i - 1)];
    }
    return 0.0;
}

long EigenProfile::axis_limit(long truncation) const {
    if (kind == Kind::Explicit)
        return std::min<long>(truncation, static_cast<long>(values.size()));
    return truncation;
}

void EigenProfile::validate() const {
    if (dim < 1) throw ConfigError("EigenProfile: dim must be >= 1");
    switch (kind) {
        case Kind::Polynomial:
            if (alpha <= 0 || c <= 0) throw ConfigError("EigenProfile: alpha, c must be positive");
            break;
        case Kind::Exponential:
            if (a <= 0 || b <= 0 || c <= 0)
                throw ConfigError("EigenProfile: a, b, c must be positive");
            break;
        case Kind::Explicit: {
            if (values.empty()) throw ConfigError("EigenProfile: explicit values empty");
            double prev = std::numeric_limits<double>::infinity();
            for (double v : values) {
                if (v <= 0) throw ConfigError("EigenProfile: eigenvalues must be positive");
                if (v > prev) throw ConfigError("EigenProfile: eigenvalues must be non-increasing");
                prev = v;
            }
            break;
        }
    }
}

long SpectralModel::default_truncation(int dim) {
    return dim >= 2 ? 3000 : 1'000'000;
}

SpectralModel::SpectralModel(EigenProfile p, double N_, double sigma2_, long truncation_)
    : profile(std::move(p)), N(N_), sigma2(sigma2_) {
    truncation = truncation_ > 0 ? truncation_ : default_truncation(profile.dim);
    validate();
}

void SpectralModel::validate() const {
    profile.validate();
    if (N <= 0) throw ConfigError("SpectralModel: N must be positive");
    if (sigma2 <= 0) throw ConfigError("SpectralModel: sigma2 must be positive");
    if (truncation < 1) throw ConfigError("SpectralModel: truncation must be >= 1");
}

double SpectralModel::mu(const MultiIndex& j) const {
    if (static_cast<int>(j.size()) != profile.dim)
        throw ConfigError("SpectralModel: multi-index dimension mismatch");
    const long limit = profile.axis_limit(truncation);
    double prod = 1.0;
    for (long ji : j) {
        if (ji < 1 || ji > limit)
            throw std::out_of_range("SpectralModel: index outside truncation");
        prod *= profile.axis_eigenvalue(ji);
    }
    return prod;
}

bool SpectralModel::spectral_condition_holds() const {
    long count = 0;
    const double thresh = sigma2 / N;
    for_each_index([&](const MultiIndex&, double mu_j) {
        if (mu_j >= thresh) ++count;
    });
    return static_cast<double>(count) <= N;
}

namespace {

void enumerate_axis(const SpectralModel& model, int axis, double mu_partial, MultiIndex& j,
                    double cutoff, double top1d,
                    const std::function<void(const MultiIndex&, double)>& fn) {
    const int d = model.profile.dim;
    const long limit = model.profile.axis_limit(model.truncation);
    // Largest possible contribution of the remaining axes.
    const double headroom = std::pow(top1d, d - axis - 1);
    for (long i = 1; i <= limit; ++i) {
        const double mu_here = mu_partial * model.profile.axis_eigenvalue(i);
        if (mu_here * headroom < cutoff) break;  // monotone along each axis
        j[static_cast<std::size_t>(axis)] = i;
        if (axis + 1 == d)
            fn(j, mu_here);
        else
            enumerate_axis(model, axis + 1, mu_here, j, cutoff, top1d, fn);
    }
}

}  // namespace

void SpectralModel::for_each_index(
    const std::function<void(const MultiIndex&, double)>& fn) const {
    MultiIndex j(static_cast<std::size_t>(profile.dim), 1);
    const double cutoff = 1e-16 * sigma2 / N;
    const double top1d = profile.axis_eigenvalue(1);
    enumerate_axis(*this, 0, 1.0, j, cutoff, top1d, fn);
}

double TruthCoefficients::l2_norm_sq() const {
    double s = 0.0;
    for (const auto& [j, f] : coeffs) s += f * f;
    return s;
}

double TruthCoefficients::sobolev_norm_sq(double beta) const {
    double s = 0.0;
    for (const auto& [j, f] : coeffs) {
        double idx_sq = 0.0;
        for (long ji : j) idx_sq += static_cast<double>(ji) * static_cast<double>(ji);
        s += std::pow(idx_sq, beta) * f * f;
    }
    return s;
}

TruthCoefficients TruthCoefficients::power_law(double exponent, long terms, long start,
                                               double scale, double beta) {
    TruthCoefficients t;
    t.smoothness_beta = beta;
    t.coeffs.reserve(static_cast<std::size_t>(terms - start + 1));
    for (long j = start; j <= terms; ++j)
        t.coeffs.emplace_back(MultiIndex{j},
                              scale * std::pow(static_cast<double>(j), -exponent));
    return t;
}

double nu(const SpectralModel& model, const MultiIndex& j) {
    const double muN = model.mu(j) * model.N;
    return muN / (model.sigma2 + muN);
}

double nu_power_sum(const SpectralModel& model, int k) {
    if (k < 1) throw ConfigError("nu_power_sum: k must be >= 1");
    double s = 0.0;
    model.for_each_index([&](const MultiIndex&, double mu_j) {
        const double muN = mu_j * model.N;
        s += std::pow(muN / (model.sigma2 + muN), k);
    });
    return s;
}

double bias_sq(const SpectralModel& model, const TruthCoefficients& truth) {
    if (truth.basis != TruthCoefficients::Basis::CosineHalfShift)
        throw ConfigError("bias_sq: truth basis does not match the model eigenbasis");
    double s = 0.0;
    for (const auto& [j, f] : truth.coeffs) {
        const double one_minus_nu = 1.0 - nu(model, j);
        s += one_minus_nu * one_minus_nu * f * f;
    }
    return s;
}

double variance_proxy(const SpectralModel& model) {
    return model.sigma2 / model.N * nu_power_sum(model, 1);
}

DeltaN delta_N(const SpectralModel& model, long m) {
    if (m < 1) throw ConfigError("delta_N: m must be >= 1");
    std::vector<double> mus;
    double nu2_sum = 0.0;
    model.for_each_index([&](const MultiIndex&, double mu_j) {
        mus.push_back(mu_j);
        const double muN = mu_j * model.N;
        const double v = muN / (model.sigma2 + muN);
        nu2_sum += v * v;
    });
    std::sort(mus.begin(), mus.end(), std::greater<>());

    const double n = model.N / static_cast<double>(m);
    const double budget_real = n / (static_cast<double>(m) * nu2_sum);
    const long budget = budget_real >= 1.0 ? static_cast<long>(budget_real) : 0;

    DeltaN out;
    out.budget_exhausted = budget < 1;
    const std::size_t keep = std::min<std::size_t>(mus.size(), static_cast<std::size_t>(budget));
    double tail = 0.0;
    for (std::size_t i = mus.size(); i > keep; --i) tail += mus[i - 1];
    out.value = model.N * nu2_sum * tail;
    return out;
}

CoverageRegime coverage_regime(const SpectralModel& model, const TruthCoefficients& truth) {
    const double b = bias_sq(model, truth);
    const double s = nu_power_sum(model, 1);
    const double r = model.N / model.sigma2 * b / s;
    CoverageRegime out;
    out.ratio = r;
    if (r <= 1.0)
        out.kind = CoverageRegime::Kind::CoverageOne;
    else if (r >= 100.0)
        out.kind = CoverageRegime::Kind::CoverageZero;
    else
        out.kind = CoverageRegime::Kind::Indeterminate;
    return out;
}

}  // namespace dgp
