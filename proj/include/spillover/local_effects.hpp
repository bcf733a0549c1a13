#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "spillover/core_model.hpp"
#include "spillover/gaussian_copula.hpp"
#include "spillover/local_poly.hpp"

namespace spillover {

/// Observable moments at one propensity pair (own p0, peer p1):
///   mu_own[d]  = E[Y_i 1{D_i = d}    | P = (p0, p1)]
///   mu_peer[d] = E[Y_i 1{D_-i = d}   | P = (p0, p1)]
///   C          = E[D_i D_-i          | P = (p0, p1)]
struct MomentPoint {
    double p0 = 0.0;
    double p1 = 0.0;
    std::array<double, 2> mu_own{};
    std::array<double, 2> mu_peer{};
    double C = 0.0;
};

struct MomentQuad {
    std::vector<MomentPoint> points;
    std::string provenance;  // "model-implied", "kernel-estimated", "simulated", ...

    const MomentPoint& at(double p0, double p1) const;
};

inline constexpr double kRatioGuard = 1e-10;

/// Peer propensity moves p1 -> p1' with own p0 fixed.
double lacse_fixed_own(int d, const MomentPoint& base, const MomentPoint& shifted);
/// Own propensity moves p0 -> p0' with peer p1 fixed.
double lacde_fixed_peer(int d, const MomentPoint& base, const MomentPoint& shifted);
/// Double differences over the four vertices of {p0, p0'} x {p1, p1'}.
double lacse_rectangle(int d, const MomentQuad& q);
double lacde_rectangle(int d, const MomentQuad& q);

/// MTR in unit orientation: m(d, d', v_own, v_peer).
using MtrFunction = std::function<double(int, int, double, double)>;

/// Moments implied by a Gaussian copula and MTR functions, integrated over
/// each treatment quadrant in normal scores.
MomentPoint model_implied_moments(const CopulaSpec& copula, const MtrFunction& mtr, double p0, double p1,
                                  int order = 48);

/// Local-cubic means of the observable moments at (p0, p1) for member `unit`.
MomentPoint kernel_moments(const Dataset& data, const std::vector<PropensityPair>& props, int unit, double p0,
                           double p1, double h, KernelType kernel = KernelType::Epanechnikov);

/// Copula-weighted average of a surface over the unit square. The Gaussian
/// version integrates in normal scores; the generic version uses a tensor
/// Legendre rule on [1e-4, 1 - 1e-4]^2.
double acse_acde(const EffectSurface& surface, const CopulaSpec& copula, int order = 48);
double acse_acde(const EffectSurface& surface, const std::function<double(double, double)>& density, int order = 64);

struct ComplierEffects {
    double spillover = 0.0;  // E[Y(0,1) - Y(0,0) | peer complier]
    double direct = 0.0;     // E[Y(1,0) - Y(0,0) | own complier]
    std::array<double, 2> shares{};  // (P(peer complier), P(own complier))
};

/// Averages MCSE(0) over {v_peer <= bound_peer} and MCDE(0) over {v_own <= bound_own}.
ComplierEffects complier_effects(const EffectSurface& mcse0, const EffectSurface& mcde0, const CopulaSpec& copula,
                                 double bound_own, double bound_peer, int order = 48);

}  // namespace spillover
