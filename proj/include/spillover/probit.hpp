#pragma once

#include <Eigen/Dense>
#include <vector>

#include "spillover/core_model.hpp"

namespace spillover {

struct MultiIndexBasis {
    int ell = 0;
    int K1 = 0;
    std::vector<std::vector<int>> terms;

    std::size_t size() const { return terms.size(); }
    /// Basis row [prod_j w_j^{k_j}] for every term.
    Eigen::VectorXd expand(const std::vector<double>& w) const;
};

/// Terms ordered by total degree, then descending lexicographic within a degree:
/// (ell=2, K1=2) gives 1, w1, w2, w1^2, w1 w2, w2^2.
MultiIndexBasis build_multi_index_basis(int ell, int K1, bool allow_intercept_only = false);

struct ProbitObjective {
    double loglik = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};

/// Log-likelihood, gradient and Hessian for rows X (already expanded) and 0/1 outcomes.
ProbitObjective probit_objective(const Eigen::VectorXd& theta, const Eigen::MatrixXd& X,
                                 const Eigen::VectorXi& d);

struct ProbitModel {
    int unit = 0;
    MultiIndexBasis basis;
    Eigen::VectorXd theta;
    bool converged = false;
    double final_gradient_norm = 0.0;
    int iterations = 0;
    double loglik = 0.0;
};

struct ProbitOptions {
    double gradient_tol = 1e-8;
    int max_iterations = 200;
    double separation_bound = 50.0;
};

Eigen::MatrixXd probit_design(const Dataset& data, const MultiIndexBasis& basis);

ProbitModel fit_probit(const Dataset& data, int unit, int K1, const ProbitOptions& opts = {});
/// Fit on a pre-expanded design; used by the bootstrap to avoid re-expansion.
ProbitModel fit_probit_design(const Eigen::MatrixXd& X, const Eigen::VectorXi& d, const MultiIndexBasis& basis,
                              int unit, const ProbitOptions& opts = {});

inline constexpr double kPropensityClamp = 1e-8;

double propensity_from_index(double index);
double predict_propensity(const ProbitModel& model, const std::vector<double>& w);

/// Fitted propensity pairs for every group, from one model per unit.
std::vector<PropensityPair> predict_pairs(const ProbitModel& m0, const ProbitModel& m1, const Dataset& data);

}  // namespace spillover
