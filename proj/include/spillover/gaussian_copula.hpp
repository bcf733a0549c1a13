#pragma once

#include <array>
#include <vector>

#include "spillover/core_model.hpp"
#include "spillover/parallel.hpp"

namespace spillover {

inline constexpr double kDefaultEpsBound = 0.99;

struct CopulaSpec {
    double rho = 0.0;
    double eps_bound = kDefaultEpsBound;
    bool boundary_warning = false;
    double loglik = 0.0;

    double cdf(double v0, double v1) const;
    double density(double v0, double v1) const;
    double quadrant(int d, int dprime, double p0, double p1) const;
};

double copula(double v0, double v1, double rho);
double copula_density(double v0, double v1, double rho);
/// Density in normal scores: c(Phi(a), Phi(b)) without the two quantile calls.
double copula_density_scores(double a, double b, double rho);
double quadrant_probability(int d, int dprime, double p0, double p1, double rho);
/// Same, given the joint CDF value C = Phi_rho(a, b) already computed.
double quadrant_from_joint(int d, int dprime, double p0, double p1, double joint);

using TreatmentPair = std::array<int, 2>;

/// Four-cell log-likelihood at rho. The serial reference uses the adaptive
/// bivariate normal CDF per group; the parallel kernel shares quadrature nodes.
double rho_loglik_reference(double rho, const std::vector<TreatmentPair>& d, const std::vector<PropensityPair>& p);
double rho_loglik_kernel(double rho, const std::vector<TreatmentPair>& d, const std::vector<PropensityPair>& p,
                         Exec exec = Exec::Parallel);

CopulaSpec fit_rho(const std::vector<TreatmentPair>& d, const std::vector<PropensityPair>& p,
                   double eps_bound = kDefaultEpsBound, Exec exec = Exec::Parallel);

std::vector<TreatmentPair> treatment_pairs(const Dataset& data);

}  // namespace spillover
