#include "spillover/pipeline.hpp"

namespace spillover {

ParametricFit fit_parametric(const Dataset& data, const ParametricConfig& config, Exec exec) {
    ParametricFit fit;
    fit.probit0 = fit_probit(data, 0, config.K1);
    fit.probit1 = fit_probit(data, 1, config.K1);
    fit.props = predict_pairs(fit.probit0, fit.probit1, data);
    fit.copula = fit_rho(treatment_pairs(data), fit.props, config.eps_bound, exec);
    fit.mtr = fit_all_arms(data, config.units, fit.props, fit.copula.rho, config.pool_units, exec, config.quad_order);
    return fit;
}

}  // namespace spillover
