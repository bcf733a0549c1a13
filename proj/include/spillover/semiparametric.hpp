#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spillover/bspline.hpp"
#include "spillover/core_model.hpp"
#include "spillover/local_poly.hpp"
#include "spillover/parallel.hpp"

namespace spillover {

enum class Penalty { None, L1Fixed, L1CV };

struct SeriesOptions {
    int kappa = 8;
    Penalty penalty = Penalty::None;
    double lambda = 0.0;  // used by L1Fixed
    int folds = 5;
    int grid_size = 50;
    std::uint64_t seed = 1;
    double trim_delta = 1e-3;
    int discrete_threshold = 10;  // columns with at most this many distinct values enter linearly
};

/// Additive series model for P(D_i = 1 | W_g) on the group input (w0, w1).
/// Design columns: intercept, then kappa-1 B-splines per continuous column
/// (the first function is dropped because the basis sums to one), then the
/// discrete columns in raw form.
struct SeriesModel {
    int unit = 0;
    int kappa = 8;
    double trim_delta = 1e-3;
    std::vector<int> continuous_cols;
    std::vector<BSplineBasis> bases;
    std::vector<int> discrete_cols;
    Eigen::VectorXd coef;
    Penalty penalty = Penalty::None;
    double lambda = 0.0;

    int design_size() const;
    Eigen::VectorXd design_row(const std::vector<double>& input) const;
    double predict_raw(const GroupRecord& g) const;
    double predict(const GroupRecord& g) const;
};

SeriesModel fit_series_propensity(const Dataset& data, int unit, const SeriesOptions& opts = {});

/// Series design matrix of the dataset under a fitted model's bases.
Eigen::MatrixXd series_design(const SeriesModel& model, const Dataset& data);

/// Cyclic coordinate descent for
///   (1/G) |y - a - X theta|^2 + 2 lambda sum_j w_j |theta_j|
/// with an unpenalized intercept a. Returns (a, theta...). `start` warm-starts theta.
Eigen::VectorXd lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                          double lambda, const Eigen::VectorXd* start = nullptr, int max_sweeps = 10000,
                          double tol = 1e-10);
/// Smallest lambda at which every slope is zero.
double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& weights);

double trim_propensity(double p_tilde, double delta);

std::vector<PropensityPair> series_propensity_pairs(const SeriesModel& m0, const SeriesModel& m1,
                                                    const Dataset& data);

/// Points in unit orientation: (own propensity, peer propensity).
std::vector<Point2> oriented_points(const std::vector<PropensityPair>& props, int unit);

struct DensityEstimate {
    Point2 point{};
    double value = 0.0;
    bool ok = false;
    bool nonnegative = false;
    std::string error;
};

/// Cross-partial of E[D0 D1 | P0, P1] at each grid point. Window failures are
/// recorded per point.
std::vector<DensityEstimate> estimate_copula_density_semiparam(const Dataset& data,
                                                               const std::vector<PropensityPair>& props,
                                                               const std::vector<Point2>& grid, double h,
                                                               KernelType kernel = KernelType::Epanechnikov,
                                                               Exec exec = Exec::Parallel);

/// Robinson-type partial-linear coefficient on (x_own, x_peer) for member `unit`.
/// With an arm, both the fit and the smoother use only groups in that arm.
Eigen::VectorXd fit_partial_linear_beta(const Dataset& data, const std::vector<PropensityPair>& props, int unit,
                                        double h, std::optional<int> arm = std::nullopt,
                                        KernelType kernel = KernelType::Epanechnikov, Exec exec = Exec::Parallel);

/// +1 on the diagonal arms, -1 off it.
inline double sign_factor(int d, int dprime) { return d == dprime ? 1.0 : -1.0; }

inline constexpr double kDenominatorGuard = 1e-3;

struct SemiparamMtr {
    double value = 0.0;
    double b4 = 0.0;
    double c4 = 0.0;
    double xbeta = 0.0;
    LocalFit numerator;
    LocalFit denominator;
};

/// x'beta + c4/b4 at the target, where c4 is the cross-partial of the signed
/// arm residual at bandwidth h2 and b4 that of D0 D1 at h1. `beta` may be empty
/// when there are no covariates; an empty target.x contributes nothing.
SemiparamMtr semiparam_mtr(const Dataset& data, const std::vector<PropensityPair>& props,
                           const Eigen::VectorXd& beta, int unit, int d, int dprime, const EvalPoint& target,
                           double h1, double h2, KernelType kernel = KernelType::Epanechnikov);

/// Signed arm residuals (Y_i - X'beta) 1{arm} sign(d, d').
std::vector<double> signed_arm_residuals(const Dataset& data, const Eigen::VectorXd& beta, int unit, int d,
                                         int dprime);

struct KernelMoments {
    Eigen::Matrix<double, 10, 10> M;
    Eigen::Matrix<double, 10, 10> Gamma;
    /// (M^-1 Gamma M^-1)(4,4): the cross-partial entry.
    double sandwich_cross() const;
};

KernelMoments kernel_moment_matrices(KernelType kernel, int order = 24);

/// sigma^2 S / (f G h^6): variance of the cross-partial estimate.
double cross_derivative_variance(KernelType kernel, double h, std::size_t G, double sigma2, double density);
/// Ratio variance with b4 in the denominator.
double asymptotic_variance(KernelType kernel, double h2, std::size_t G, double b4_hat, double sigma2_hat,
                           double density_hat);

struct BandwidthChoice {
    double h = 0.0;
    std::vector<double> grid;
    std::vector<double> cv_error;
};

/// K-fold CV on the local-cubic mean; ties go to the larger bandwidth.
BandwidthChoice select_bandwidth(const std::vector<Point2>& points, const std::vector<double>& responses,
                                 std::vector<double> grid, int folds = 5, std::uint64_t seed = 1,
                                 KernelType kernel = KernelType::Epanechnikov, std::size_t max_eval_per_fold = 100,
                                 Exec exec = Exec::Parallel);

/// Keeps the numerator bandwidth strictly below the denominator one.
inline double constrain_h2(double candidate, double h1) { return candidate < 0.9 * h1 ? candidate : 0.9 * h1; }

// End-to-end semiparametric estimator used by the command line driver.
struct SemiparamConfig {
    SeriesOptions series;
    double h1 = 0.25;
    double h2 = 0.2;
    double h_beta = 0.2;
    KernelType kernel = KernelType::Epanechnikov;
    bool cv_bandwidth = false;
    std::vector<double> h_grid{0.15, 0.2, 0.25, 0.3, 0.35, 0.4};
    int unit = 0;
};

struct SemiparamFit {
    SeriesModel series0;
    SeriesModel series1;
    std::vector<PropensityPair> props;
    std::array<Eigen::VectorXd, 4> beta;  // by arm_index
    double h1 = 0.0;
    double h2 = 0.0;
    int unit = 0;
    KernelType kernel = KernelType::Epanechnikov;
};

SemiparamFit fit_semiparametric(const Dataset& data, const SemiparamConfig& cfg, Exec exec = Exec::Parallel);

/// MTR / MCSE / MCDE surfaces backed by local fits on the fitted sample. The
/// surface keeps its own copy of the points and residuals.
EffectSurface semiparam_surface(const Dataset& data, const SemiparamFit& fit, EffectKind kind, int d,
                                int dprime = -1);

struct PointVariance {
    double estimate = 0.0;
    double variance = 0.0;
    double b4 = 0.0;
    double sigma2 = 0.0;
    double density = 0.0;
};

/// Plug-in pointwise variance of the ratio c4/b4 for arm (d, d').
PointVariance semiparam_point_variance(const Dataset& data, const SemiparamFit& fit, int d, int dprime,
                                       Point2 target);

}  // namespace spillover
