#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "spillover/core_model.hpp"
#include "spillover/parallel.hpp"
#include "spillover/quadrature.hpp"

namespace spillover {

/// Coefficients of m(x, d, d')(v_own, v_peer) for one unit and arm. beta is
/// ordered (x_own, x_peer), so its length is 2 * x_dim.
struct MtrCoefficients {
    int unit = 0;
    int d = 1;
    int dprime = 1;
    std::array<double, 4> alpha{0.0, 0.0, 0.0, 0.0};
    Eigen::VectorXd beta;
    double condition_number = 1.0;
    bool ill_conditioned = false;
    bool pooled = false;
};

class MtrSet {
public:
    void put(const MtrCoefficients& c);
    bool has(int unit, int d, int dprime) const;
    /// Throws "missing-arm" when the arm was never fitted.
    const MtrCoefficients& get(int unit, int d, int dprime) const;
    const std::vector<MtrCoefficients>& all() const { return items_; }

private:
    std::vector<MtrCoefficients> items_;
};

/// [I0, I1, I2, I3, x * I0] for arm (d, d') at (p_own, p_peer).
Eigen::VectorXd build_regressor_row(int d, int dprime, double p_own, double p_peer, double rho,
                                    const std::vector<double>& x, int order = kDefaultMomentOrder);

struct MtrDesign {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

/// Stacked rows for one arm. Serial and parallel variants fill identical slots.
MtrDesign build_mtr_design(const Dataset& data, int unit, int d, int dprime, const std::vector<PropensityPair>& props,
                           double rho, bool pool_units, Exec exec = Exec::Parallel,
                           int order = kDefaultMomentOrder);

/// OLS via column-pivoting QR; errors with "rank-deficient".
MtrCoefficients solve_mtr_design(const MtrDesign& design, int unit, int d, int dprime, bool pooled);

MtrCoefficients fit_mtr_coefficients(const Dataset& data, int unit, int d, int dprime,
                                     const std::vector<PropensityPair>& props, double rho, bool pool_units = false,
                                     Exec exec = Exec::Parallel, int order = kDefaultMomentOrder);

/// All four arms for the listed units, sharing one moment evaluation per group.
MtrSet fit_all_arms(const Dataset& data, const std::vector<int>& units, const std::vector<PropensityPair>& props,
                    double rho, bool pool_units = false, Exec exec = Exec::Parallel,
                    int order = kDefaultMomentOrder);

double evaluate_mtr(const MtrCoefficients& c, const std::vector<double>& x, double v0, double v1);

double mcse_parametric(const MtrSet& all, int unit, int d, const EvalPoint& pt);
double mcde_parametric(const MtrSet& all, int unit, int d, const EvalPoint& pt);

EffectSurface mtr_surface(const MtrSet& all, int unit, int d, int dprime);
EffectSurface mcse_surface(const MtrSet& all, int unit, int d);
EffectSurface mcde_surface(const MtrSet& all, int unit, int d);

}  // namespace spillover
