#pragma once

#include <array>

namespace spillover {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double std_normal_pdf(double x);
double std_normal_cdf(double x);
/// Inverse of std_normal_cdf; rejects u outside (0,1).
double std_normal_quantile(double u);

/// Density of the standard bivariate normal with correlation rho.
double bvn_pdf(double a, double b, double rho);

/// P(T0 <= a, T1 <= b) for a standard bivariate normal with correlation rho,
/// via Phi(a)Phi(b) + int_0^rho phi2(a,b;r) dr under r = sin(theta), with
/// adaptive Gauss-Legendre. Rejects |rho| >= 1.
double bvn_cdf(double a, double b, double rho);

/// Fixed-rho evaluator that shares quadrature nodes across many (a,b) pairs.
/// Uses a single 20-node rule for |rho| <= 0.9 and the adaptive routine beyond.
class BvnBatch {
public:
    explicit BvnBatch(double rho);
    double operator()(double a, double b) const;
    double rho() const { return rho_; }

private:
    double rho_;
    bool adaptive_;
    std::array<double, 20> sin_{}, half_inv_cos2_{}, weight_{};
};

}  // namespace spillover
