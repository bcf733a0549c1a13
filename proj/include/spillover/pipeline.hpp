#pragma once

#include <vector>

#include "spillover/core_model.hpp"
#include "spillover/gaussian_copula.hpp"
#include "spillover/mtr_parametric.hpp"
#include "spillover/parallel.hpp"
#include "spillover/probit.hpp"

namespace spillover {

/// Three-stage parametric estimator: per-unit probit, copula rho, MTR least squares.
struct ParametricConfig {
    int K1 = 1;
    double eps_bound = kDefaultEpsBound;
    bool pool_units = false;
    std::vector<int> units{0};
    int quad_order = kDefaultMomentOrder;
};

struct ParametricFit {
    ProbitModel probit0;
    ProbitModel probit1;
    std::vector<PropensityPair> props;
    CopulaSpec copula;
    MtrSet mtr;
};

ParametricFit fit_parametric(const Dataset& data, const ParametricConfig& config, Exec exec = Exec::Parallel);

}  // namespace spillover
