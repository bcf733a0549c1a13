#include "spillover/mtr_parametric.hpp"

#include <cmath>

#include "spillover/errors.hpp"
#include "spillover/normal.hpp"

namespace spillover {

void MtrSet::put(const MtrCoefficients& c) {
    for (auto& item : items_) {
        if (item.unit == c.unit && item.d == c.d && item.dprime == c.dprime) {
            item = c;
            return;
        }
    }
    items_.push_back(c);
}

bool MtrSet::has(int unit, int d, int dprime) const {
    for (const auto& item : items_) {
        if (item.unit == unit && item.d == d && item.dprime == dprime) return true;
    }
    return false;
}

const MtrCoefficients& MtrSet::get(int unit, int d, int dprime) const {
    for (const auto& item : items_) {
        if (item.unit == unit && item.d == d && item.dprime == dprime) return item;
    }
    throw ConfigError("missing-arm: no MTR coefficients for unit " + std::to_string(unit) + ", arm (" +
                      std::to_string(d) + "," + std::to_string(dprime) + ")");
}

namespace {

template <class Row>
void fill_row(Row&& row, const std::array<double, 4>& m, const std::vector<double>& x) {
    for (int j = 0; j < 4; ++j) row(j) = m[j];
    for (std::size_t k = 0; k < x.size(); ++k) row(4 + static_cast<Eigen::Index>(k)) = x[k] * m[0];
}

double arm_response(const GroupRecord& g, int unit, int d, int dprime) {
    const bool in_arm = g.d[unit] == d && g.d[peer_of(unit)] == dprime;
    return in_arm ? g.y[unit] : 0.0;
}

}  // namespace

Eigen::VectorXd build_regressor_row(int d, int dprime, double p_own, double p_peer, double rho,
                                    const std::vector<double>& x, int order) {
    const auto m = truncated_moments(d, dprime, p_own, p_peer, rho, order);
    Eigen::RowVectorXd row(4 + static_cast<Eigen::Index>(x.size()));
    fill_row(row, m, x);
    return row.transpose();
}

MtrDesign build_mtr_design(const Dataset& data, int unit, int d, int dprime, const std::vector<PropensityPair>& props,
                           double rho, bool pool_units, Exec exec, int order) {
    check_unit(unit);
    check_binary(d, "d");
    check_binary(dprime, "dprime");
    if (props.size() != data.size()) throw DataError("propensities do not match the dataset");
    const std::size_t G = data.size();
    const std::size_t per = pool_units ? 2 : 1;
    const Eigen::Index cols = 4 + 2 * static_cast<Eigen::Index>(data.layout.x_dim);
    MtrDesign out{Eigen::MatrixXd(static_cast<Eigen::Index>(G * per), cols),
                  Eigen::VectorXd(static_cast<Eigen::Index>(G * per))};
    const int arm = arm_index(d, dprime);
    for_each_index(G, exec, [&](std::size_t g) {
        const auto& rec = data.groups[g];
        for (std::size_t k = 0; k < per; ++k) {
            const int u = pool_units ? static_cast<int>(k) : unit;
            const double a = std_normal_quantile(own_p(props[g], u));
            const double b = std_normal_quantile(peer_p(props[g], u));
            const auto moments = quadrant_moments_all(a, b, rho, order);
            const auto r = static_cast<Eigen::Index>(g * per + k);
            fill_row(out.X.row(r), moments[arm], group_covariates(rec, u));
            out.y(r) = arm_response(rec, u, d, dprime);
        }
    });
    return out;
}

MtrCoefficients solve_mtr_design(const MtrDesign& design, int unit, int d, int dprime, bool pooled) {
    const std::string arm = "(" + std::to_string(d) + "," + std::to_string(dprime) + ")";
    if (design.y.cwiseAbs().maxCoeff() == 0.0) {
        throw NumericalError("rank-deficient: response is identically zero for arm " + arm);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.X);
    if (qr.rank() < design.X.cols()) {
        throw NumericalError("rank-deficient: MTR design for arm " + arm + " has rank " + std::to_string(qr.rank()) +
                             " < " + std::to_string(design.X.cols()));
    }
    const Eigen::VectorXd coef = qr.solve(design.y);
    const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(design.X.cols(), design.X.cols()).triangularView<Eigen::Upper>();
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(R).singularValues();
    MtrCoefficients c;
    c.unit = unit;
    c.d = d;
    c.dprime = dprime;
    c.pooled = pooled;
    for (int j = 0; j < 4; ++j) c.alpha[j] = coef(j);
    c.beta = coef.tail(coef.size() - 4);
    c.condition_number = sv(0) / sv(sv.size() - 1);
    c.ill_conditioned = c.condition_number > 1e10;
    return c;
}

MtrCoefficients fit_mtr_coefficients(const Dataset& data, int unit, int d, int dprime,
                                     const std::vector<PropensityPair>& props, double rho, bool pool_units, Exec exec,
                                     int order) {
    const auto design = build_mtr_design(data, unit, d, dprime, props, rho, pool_units, exec, order);
    if (design.X.rows() < design.X.cols()) throw DataError("too few groups for the MTR regression");
    return solve_mtr_design(design, unit, d, dprime, pool_units);
}

MtrSet fit_all_arms(const Dataset& data, const std::vector<int>& units, const std::vector<PropensityPair>& props,
                    double rho, bool pool_units, Exec exec, int order) {
    if (props.size() != data.size()) throw DataError("propensities do not match the dataset");
    const std::size_t G = data.size();
    const Eigen::Index xcols = 2 * static_cast<Eigen::Index>(data.layout.x_dim);
    const Eigen::Index cols = 4 + xcols;
    // moments[u][g] holds all four quadrants for unit u's orientation.
    std::array<std::vector<std::array<std::array<double, 4>, 4>>, 2> moments;
    std::array<bool, 2> need{false, false};
    for (int u : units) {
        check_unit(u);
        need[u] = true;
    }
    if (pool_units) need = {true, true};
    for (int u = 0; u < 2; ++u) {
        if (!need[u]) continue;
        moments[u].resize(G);
        for_each_index(G, exec, [&](std::size_t g) {
            moments[u][g] = quadrant_moments_all(std_normal_quantile(own_p(props[g], u)),
                                                 std_normal_quantile(peer_p(props[g], u)), rho, order);
        });
    }
    MtrSet set;
    const std::vector<int> fit_units = pool_units ? std::vector<int>{0} : units;
    for (int u : fit_units) {
        for (int d : {1, 0}) {
            for (int dp : {1, 0}) {
                const int arm = arm_index(d, dp);
                const std::size_t per = pool_units ? 2 : 1;
                MtrDesign design{Eigen::MatrixXd(static_cast<Eigen::Index>(G * per), cols),
                                 Eigen::VectorXd(static_cast<Eigen::Index>(G * per))};
                for (std::size_t g = 0; g < G; ++g) {
                    for (std::size_t k = 0; k < per; ++k) {
                        const int uu = pool_units ? static_cast<int>(k) : u;
                        const auto r = static_cast<Eigen::Index>(g * per + k);
                        const auto x = xcols > 0 ? group_covariates(data.groups[g], uu) : std::vector<double>{};
                        fill_row(design.X.row(r), moments[uu][g][arm], x);
                        design.y(r) = arm_response(data.groups[g], uu, d, dp);
                    }
                }
                MtrCoefficients c = solve_mtr_design(design, u, d, dp, pool_units);
                set.put(c);
                if (pool_units) {
                    c.unit = 1;
                    set.put(c);
                }
            }
        }
    }
    return set;
}

double evaluate_mtr(const MtrCoefficients& c, const std::vector<double>& x, double v0, double v1) {
    if (!(v0 > 0.0 && v0 < 1.0 && v1 > 0.0 && v1 < 1.0)) throw ConfigError("evaluate_mtr requires interior (v0, v1)");
    double xb = 0.0;
    if (c.beta.size() > 0) {
        if (static_cast<Eigen::Index>(x.size()) != c.beta.size()) {
            throw ConfigError("covariate point has length " + std::to_string(x.size()) + ", expected " +
                              std::to_string(c.beta.size()));
        }
        for (Eigen::Index k = 0; k < c.beta.size(); ++k) xb += x[static_cast<std::size_t>(k)] * c.beta(k);
    }
    const double t0 = std_normal_quantile(v0), t1 = std_normal_quantile(v1);
    return xb + c.alpha[0] + c.alpha[1] * t0 + c.alpha[2] * t1 + c.alpha[3] * t0 * t1;
}

double mcse_parametric(const MtrSet& all, int unit, int d, const EvalPoint& pt) {
    return evaluate_mtr(all.get(unit, d, 1), pt.x, pt.p0, pt.p1) - evaluate_mtr(all.get(unit, d, 0), pt.x, pt.p0, pt.p1);
}

double mcde_parametric(const MtrSet& all, int unit, int d, const EvalPoint& pt) {
    return evaluate_mtr(all.get(unit, 1, d), pt.x, pt.p0, pt.p1) - evaluate_mtr(all.get(unit, 0, d), pt.x, pt.p0, pt.p1);
}

EffectSurface mtr_surface(const MtrSet& all, int unit, int d, int dprime) {
    const MtrCoefficients c = all.get(unit, d, dprime);
    return {EffectKind::MTR, d, dprime, unit,
            [c](const EvalPoint& pt) { return evaluate_mtr(c, pt.x, pt.p0, pt.p1); }};
}

EffectSurface mcse_surface(const MtrSet& all, int unit, int d) {
    const MtrCoefficients hi = all.get(unit, d, 1), lo = all.get(unit, d, 0);
    return {EffectKind::MCSE, d, -1, unit, [hi, lo](const EvalPoint& pt) {
                return evaluate_mtr(hi, pt.x, pt.p0, pt.p1) - evaluate_mtr(lo, pt.x, pt.p0, pt.p1);
            }};
}

EffectSurface mcde_surface(const MtrSet& all, int unit, int d) {
    const MtrCoefficients hi = all.get(unit, 1, d), lo = all.get(unit, 0, d);
    return {EffectKind::MCDE, d, -1, unit, [hi, lo](const EvalPoint& pt) {
                return evaluate_mtr(hi, pt.x, pt.p0, pt.p1) - evaluate_mtr(lo, pt.x, pt.p0, pt.p1);
            }};
}

}  // namespace spillover
