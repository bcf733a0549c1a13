#pragma once

#include <array>
#include <functional>
#include <vector>

namespace spillover {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    int order = 0;
};

/// Physicists' Hermite rule: sum_k w_k f(x_k) ~ int f(x) exp(-x^2) dx, weights sum to sqrt(pi).
QuadratureRule gauss_hermite_rule(int n);
/// Legendre rule on [-1, 1].
QuadratureRule gauss_legendre_rule(int n);
/// Thread-safe memoised Legendre rule.
const QuadratureRule& cached_gauss_legendre(int n);
const QuadratureRule& cached_gauss_hermite(int n);

/// E[f(T)] for T ~ N(0,1) using an n-point Hermite rule.
double normal_expectation(const std::function<double(double)>& f, int n);

inline constexpr int kDefaultMomentOrder = 48;
inline constexpr double kTailClip = 8.0;

/// Moments int_Q g_j(t0,t1) phi_rho(t0,t1) for g = (1, t0, t1, t0*t1) over the
/// quadrant Q = {t0 <= a if d = 1, t0 > a if d = 0} x {same for t1 and b}.
std::array<double, 4> truncated_moments_ab(int d, int dprime, double a, double b, double rho,
                                           int order = kDefaultMomentOrder);
std::array<double, 4> truncated_moments(int d, int dprime, double p0, double p1, double rho,
                                        int order = kDefaultMomentOrder);
double truncated_moment(int j, int d, int dprime, double p0, double p1, double rho,
                        int order = kDefaultMomentOrder);

}  // namespace spillover

namespace spillover {

inline int arm_index(int d, int dprime) { return 2 * d + dprime; }

/// All four quadrants at once, indexed by arm_index(d, d'). The (1,1) quadrant
/// is integrated directly and the rest follow from closed-form half-plane moments.
std::array<std::array<double, 4>, 4> quadrant_moments_all(double a, double b, double rho,
                                                          int order = kDefaultMomentOrder);

}  // namespace spillover
