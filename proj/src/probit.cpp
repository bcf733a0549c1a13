#include "spillover/probit.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "spillover/errors.hpp"
#include "spillover/normal.hpp"

namespace spillover {

MultiIndexBasis build_multi_index_basis(int ell, int K1, bool allow_intercept_only) {
    if (ell < 1) throw ConfigError("basis dimension ell must be >= 1");
    if (K1 < 0 || (K1 == 0 && !allow_intercept_only)) {
        throw ConfigError("basis degree K1 must be >= 1 (intercept-only needs the explicit flag)");
    }
    MultiIndexBasis basis;
    basis.ell = ell;
    basis.K1 = K1;
    std::vector<int> cur(ell, 0);
    // Within degree `deg`, recursively give the first coordinate as much of the
    // remaining degree as possible first.
    std::function<void(int, int)> fill = [&](int pos, int remaining) {
        if (pos == ell - 1) {
            cur[pos] = remaining;
            basis.terms.push_back(cur);
            return;
        }
        for (int k = remaining; k >= 0; --k) {
            cur[pos] = k;
            fill(pos + 1, remaining - k);
        }
    };
    for (int deg = 0; deg <= K1; ++deg) fill(0, deg);
    return basis;
}

Eigen::VectorXd MultiIndexBasis::expand(const std::vector<double>& w) const {
    if (static_cast<int>(w.size()) != ell) throw DataError("basis input has wrong length");
    Eigen::VectorXd row(static_cast<Eigen::Index>(terms.size()));
    for (std::size_t t = 0; t < terms.size(); ++t) {
        double v = 1.0;
        for (int j = 0; j < ell; ++j) {
            for (int k = 0; k < terms[t][j]; ++k) v *= w[j];
        }
        row(static_cast<Eigen::Index>(t)) = v;
    }
    return row;
}

namespace {

constexpr double kLogClip = 1e-10;

struct TermDerivs {
    double loglik, score, curvature;
};

// Contribution of one observation with index x. Derivatives are those of the
// clipped objective, so they vanish wherever the clip is active.
TermDerivs probit_term(double x, int d) {
    const double sx = d == 1 ? x : -x;
    const double p = std_normal_cdf(sx);
    if (p < kLogClip) return {std::log(kLogClip), 0.0, 0.0};
    if (p > 1.0 - kLogClip) return {std::log1p(-kLogClip), 0.0, 0.0};
    const double lambda = std_normal_pdf(sx) / p;
    const double sign = d == 1 ? 1.0 : -1.0;
    return {std::log(p), sign * lambda, -lambda * (lambda + sx)};
}

}  // namespace

ProbitObjective probit_objective(const Eigen::VectorXd& theta, const Eigen::MatrixXd& X, const Eigen::VectorXi& d) {
    if (theta.size() != X.cols()) throw ConfigError("theta length does not match the basis");
    const Eigen::VectorXd index = X * theta;
    ProbitObjective out;
    out.gradient = Eigen::VectorXd::Zero(X.cols());
    Eigen::VectorXd curv(X.rows());
    Eigen::VectorXd score(X.rows());
    for (Eigen::Index g = 0; g < X.rows(); ++g) {
        const TermDerivs t = probit_term(index(g), d(g));
        out.loglik += t.loglik;
        score(g) = t.score;
        curv(g) = t.curvature;
    }
    out.gradient = X.transpose() * score;
    out.hessian = X.transpose() * curv.asDiagonal() * X;
    return out;
}

Eigen::MatrixXd probit_design(const Dataset& data, const MultiIndexBasis& basis) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(basis.size()));
    for (std::size_t g = 0; g < data.size(); ++g) {
        X.row(static_cast<Eigen::Index>(g)) = basis.expand(group_input(data.groups[g])).transpose();
    }
    return X;
}

ProbitModel fit_probit_design(const Eigen::MatrixXd& X, const Eigen::VectorXi& d, const MultiIndexBasis& basis,
                              int unit, const ProbitOptions& opts) {
    const int treated = d.sum();
    if (treated == 0 || treated == d.size()) {
        throw NumericalError("degenerate: treatment of unit " + std::to_string(unit) + " is constant");
    }
    ProbitModel model;
    model.unit = unit;
    model.basis = basis;
    model.theta = Eigen::VectorXd::Zero(X.cols());
    ProbitObjective obj = probit_objective(model.theta, X, d);
    for (int it = 0; it < opts.max_iterations; ++it) {
        model.final_gradient_norm = obj.gradient.cwiseAbs().maxCoeff();
        if (model.final_gradient_norm <= opts.gradient_tol) {
            model.converged = true;
            break;
        }
        model.iterations = it + 1;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(-obj.hessian);
        Eigen::VectorXd step;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            step = ldlt.solve(obj.gradient);
        } else {
            step = obj.gradient;  // flat curvature: fall back to ascent direction
        }
        double scale = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            const Eigen::VectorXd trial = model.theta + scale * step;
            if (trial.cwiseAbs().maxCoeff() > opts.separation_bound) {
                throw NumericalError("separation: probit coefficient for unit " + std::to_string(unit) +
                                     " exceeded " + std::to_string(opts.separation_bound));
            }
            ProbitObjective next = probit_objective(trial, X, d);
            if (next.loglik >= obj.loglik) {
                model.theta = trial;
                obj = std::move(next);
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break;
    }
    model.final_gradient_norm = obj.gradient.cwiseAbs().maxCoeff();
    model.converged = model.final_gradient_norm <= opts.gradient_tol;
    model.loglik = obj.loglik;
    return model;
}

ProbitModel fit_probit(const Dataset& data, int unit, int K1, const ProbitOptions& opts) {
    check_unit(unit);
    if (data.size() == 0) throw DataError("empty dataset");
    const int ell = static_cast<int>(2 * data.groups.front().w[0].size());
    const MultiIndexBasis basis = build_multi_index_basis(ell, K1);
    const Eigen::MatrixXd X = probit_design(data, basis);
    Eigen::VectorXi d(static_cast<Eigen::Index>(data.size()));
    for (std::size_t g = 0; g < data.size(); ++g) d(static_cast<Eigen::Index>(g)) = data.groups[g].d[unit];
    return fit_probit_design(X, d, basis, unit, opts);
}

double propensity_from_index(double index) {
    return std::clamp(std_normal_cdf(index), kPropensityClamp, 1.0 - kPropensityClamp);
}

double predict_propensity(const ProbitModel& model, const std::vector<double>& w) {
    return propensity_from_index(model.basis.expand(w).dot(model.theta));
}

std::vector<PropensityPair> predict_pairs(const ProbitModel& m0, const ProbitModel& m1, const Dataset& data) {
    std::vector<PropensityPair> out(data.size());
    for (std::size_t g = 0; g < data.size(); ++g) {
        const auto w = group_input(data.groups[g]);
        out[g] = {predict_propensity(m0, w), predict_propensity(m1, w)};
    }
    return out;
}

}  // namespace spillover
