#include "spillover/local_poly.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "spillover/errors.hpp"
#include "spillover/normal.hpp"

namespace spillover {

KernelType parse_kernel(const std::string& name) {
    if (name == "epanechnikov") return KernelType::Epanechnikov;
    if (name == "gaussian") return KernelType::Gaussian;
    if (name == "uniform") return KernelType::Uniform;
    throw ConfigError("unknown kernel '" + name + "' (expected epanechnikov, gaussian or uniform)");
}

std::string to_string(KernelType k) {
    switch (k) {
        case KernelType::Epanechnikov: return "epanechnikov";
        case KernelType::Gaussian: return "gaussian";
        case KernelType::Uniform: return "uniform";
    }
    return "unknown";
}

double kernel_value(KernelType k, double u) {
    switch (k) {
        case KernelType::Epanechnikov: return std::fabs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
        case KernelType::Gaussian: return std_normal_pdf(u);
        case KernelType::Uniform: return std::fabs(u) <= 1.0 ? 0.5 : 0.0;
    }
    return 0.0;
}

bool kernel_compact(KernelType k) { return k != KernelType::Gaussian; }

namespace {

void check_bandwidth(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("bandwidth must be positive and finite");
}

inline std::array<double, 10> cubic_basis(double u0, double u1) {
    return {1.0, u0, u1, u0 * u0, u0 * u1, u1 * u1, u0 * u0 * u0, u0 * u0 * u1, u0 * u1 * u1, u1 * u1 * u1};
}

constexpr std::array<int, 10> kDegree{0, 1, 1, 2, 2, 2, 3, 3, 3, 3};

}  // namespace

LocalFit local_cubic_fit(const std::vector<Point2>& points, const std::vector<double>& responses, Point2 target,
                         double h, KernelType kernel) {
    check_bandwidth(h);
    if (points.size() != responses.size()) throw DataError("points and responses differ in length");
    LocalFit fit;
    fit.target = target;
    fit.h = h;
    fit.kernel = kernel;
    std::vector<std::size_t> idx;
    std::vector<double> wts;
    idx.reserve(points.size());
    wts.reserve(points.size());
    for (std::size_t g = 0; g < points.size(); ++g) {
        const double w = kernel_value(kernel, (points[g][0] - target[0]) / h) *
                         kernel_value(kernel, (points[g][1] - target[1]) / h);
        if (w > 0.0) {
            idx.push_back(g);
            wts.push_back(w);
            fit.weight_sum += w;
        }
    }
    fit.n_window = idx.size();
    if (idx.empty()) throw NumericalError("empty window at (" + std::to_string(target[0]) + ", " +
                                          std::to_string(target[1]) + ")");
    // Solve in bandwidth-scaled coordinates for conditioning, then unscale.
    Eigen::MatrixXd X(static_cast<Eigen::Index>(idx.size()), 10);
    Eigen::VectorXd yv(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto& p = points[idx[r]];
        const double sw = std::sqrt(wts[r]);
        const auto row = cubic_basis((p[0] - target[0]) / h, (p[1] - target[1]) / h);
        for (int j = 0; j < 10; ++j) X(static_cast<Eigen::Index>(r), j) = sw * row[j];
        yv(static_cast<Eigen::Index>(r)) = sw * responses[idx[r]];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < 10) {
        throw NumericalError("singular window at (" + std::to_string(target[0]) + ", " + std::to_string(target[1]) +
                             "): local design rank " + std::to_string(qr.rank()));
    }
    const Eigen::VectorXd c = qr.solve(yv);
    fit.residual_variance = (yv - X * c).squaredNorm() / fit.weight_sum;
    for (int j = 0; j < 10; ++j) fit.coef[j] = c(j) / std::pow(h, kDegree[j]);
    return fit;
}

double nadaraya_watson_2d(const std::vector<Point2>& points, const std::vector<double>& responses, Point2 target,
                          double h, KernelType kernel) {
    check_bandwidth(h);
    double num = 0.0, den = 0.0;
    for (std::size_t g = 0; g < points.size(); ++g) {
        const double w = kernel_value(kernel, (points[g][0] - target[0]) / h) *
                         kernel_value(kernel, (points[g][1] - target[1]) / h);
        num += w * responses[g];
        den += w;
    }
    if (!(den > 0.0)) throw NumericalError("empty window in Nadaraya-Watson smoother");
    return num / den;
}

double kernel_density_2d(const std::vector<Point2>& points, Point2 target, double h, KernelType kernel) {
    check_bandwidth(h);
    if (points.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& p : points) {
        acc += kernel_value(kernel, (p[0] - target[0]) / h) * kernel_value(kernel, (p[1] - target[1]) / h);
    }
    return acc / (static_cast<double>(points.size()) * h * h);
}

std::vector<double> local_poly_1d(const std::vector<double>& x, const std::vector<double>& y, double target, double h,
                                  int degree, KernelType kernel) {
    check_bandwidth(h);
    if (degree < 0) throw ConfigError("polynomial degree must be >= 0");
    std::vector<std::size_t> idx;
    std::vector<double> wts;
    for (std::size_t g = 0; g < x.size(); ++g) {
        const double w = kernel_value(kernel, (x[g] - target) / h);
        if (w > 0.0) {
            idx.push_back(g);
            wts.push_back(w);
        }
    }
    const int p = degree + 1;
    if (static_cast<int>(idx.size()) < p) throw NumericalError("empty window in one-dimensional local fit");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(idx.size()), p);
    Eigen::VectorXd yv(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const double sw = std::sqrt(wts[r]);
        const double u = (x[idx[r]] - target) / h;
        double pw = 1.0;
        for (int k = 0; k < p; ++k) {
            X(static_cast<Eigen::Index>(r), k) = sw * pw;
            pw *= u;
        }
        yv(static_cast<Eigen::Index>(r)) = sw * y[idx[r]];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw NumericalError("singular window in one-dimensional local fit");
    const Eigen::VectorXd c = qr.solve(yv);
    std::vector<double> out(static_cast<std::size_t>(p));
    for (int k = 0; k < p; ++k) out[static_cast<std::size_t>(k)] = c(k) / std::pow(h, k);
    return out;
}

}  // namespace spillover
