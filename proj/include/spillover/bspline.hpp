#pragma once

#include <vector>

namespace spillover {

/// Clamped B-spline basis of the given degree with `size` functions. Inputs
/// outside [lo, hi] are clamped to the boundary.
class BSplineBasis {
public:
    BSplineBasis() = default;
    BSplineBasis(std::vector<double> interior_knots, double lo, double hi, int degree = 3);

    int size() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
    int degree() const { return degree_; }
    const std::vector<double>& knots() const { return knots_; }
    double lower() const { return lo_; }
    double upper() const { return hi_; }

    std::vector<double> evaluate(double x) const;

private:
    std::vector<double> knots_;
    double lo_ = 0.0, hi_ = 1.0;
    int degree_ = 3;
};

/// kappa cubic functions with interior knots at equispaced sample quantiles.
BSplineBasis quantile_bspline(const std::vector<double>& sample, int kappa, int degree = 3);

}  // namespace spillover
