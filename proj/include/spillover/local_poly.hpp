#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace spillover {

enum class KernelType { Epanechnikov, Gaussian, Uniform };

KernelType parse_kernel(const std::string& name);
std::string to_string(KernelType k);

/// Univariate kernel; Epanechnikov and uniform live on [-1, 1].
double kernel_value(KernelType k, double u);
bool kernel_compact(KernelType k);

using Point2 = std::array<double, 2>;

/// Local cubic fit in two dimensions over the basis
/// [1, u0, u1, u0^2, u0 u1, u1^2, u0^3, u0^2 u1, u0 u1^2, u1^3], u = P - target.
struct LocalFit {
    Point2 target{0.5, 0.5};
    double h = 0.0;
    KernelType kernel = KernelType::Epanechnikov;
    std::array<double, 10> coef{};
    double weight_sum = 0.0;
    std::size_t n_window = 0;
    double residual_variance = 0.0;  // kernel-weighted mean squared residual

    double mean() const { return coef[0]; }
    double cross_partial() const { return coef[4]; }
};

inline constexpr int kCrossIndex = 4;

LocalFit local_cubic_fit(const std::vector<Point2>& points, const std::vector<double>& responses, Point2 target,
                         double h, KernelType kernel = KernelType::Epanechnikov);

/// Product-kernel Nadaraya-Watson mean; throws "empty window" if no weight.
double nadaraya_watson_2d(const std::vector<Point2>& points, const std::vector<double>& responses, Point2 target,
                          double h, KernelType kernel = KernelType::Epanechnikov);

/// Product-kernel density estimate at target.
double kernel_density_2d(const std::vector<Point2>& points, Point2 target, double h,
                         KernelType kernel = KernelType::Epanechnikov);

/// Local polynomial of given degree in one dimension; returns coefficients on
/// (x - target)^k, so coef[1] is the slope.
std::vector<double> local_poly_1d(const std::vector<double>& x, const std::vector<double>& y, double target, double h,
                                  int degree, KernelType kernel = KernelType::Epanechnikov);

}  // namespace spillover
