#include "spillover/simulation.hpp"

#include <cmath>
#include <memory>

#include "spillover/errors.hpp"
#include "spillover/local_poly.hpp"
#include "spillover/normal.hpp"
#include "spillover/quadrature.hpp"
#include "spillover/rng.hpp"

namespace spillover {

DgpConfig::DgpConfig() {
    sigma_z << 1.0, 0.1, 0.1, 1.0;
    sigma_v << 1.0, 0.2, 0.2, 1.0;
}

DgpConfig DgpConfig::sutva() {
    DgpConfig c;
    c.sigma_v << 1.0, 0.0, 0.0, 1.0;
    c.threshold = {{{1.0, 0.0}, {0.0, 1.0}}};
    c.intercept = {2.0, 2.0, 3.0, 3.0};
    c.peer_loading = {0.0, 0.0, 0.0, 0.0};
    c.interaction = {0.0, 0.0, 0.0, 0.0};
    return c;
}

namespace {

bool spd2(const Eigen::Matrix2d& m) {
    return std::fabs(m(0, 1) - m(1, 0)) < 1e-12 && m(0, 0) > 0.0 && m(1, 1) > 0.0 && m.determinant() > 0.0;
}

}  // namespace

void DgpConfig::validate() const {
    if (G == 0) throw ConfigError("DGP needs G >= 1");
    if (!spd2(sigma_z)) throw ConfigError("sigma_z must be symmetric positive definite");
    if (!spd2(sigma_v)) throw ConfigError("sigma_v must be symmetric positive definite");
}

double DgpConfig::rho() const { return sigma_v(0, 1) / std::sqrt(sigma_v(0, 0) * sigma_v(1, 1)); }

Latents draw_latents(const DgpConfig& config, std::size_t g) {
    CounterRng rng(derive_key(config.seed, stream::kData), g);
    const Eigen::Matrix2d lz = config.sigma_z.llt().matrixL();
    const Eigen::Matrix2d lv = config.sigma_v.llt().matrixL();
    const Eigen::Vector2d ez(rng.normal(), rng.normal());
    const Eigen::Vector2d ev(rng.normal(), rng.normal());
    const Eigen::Vector2d z = lz * ez, v = lv * ev;
    Latents lat;
    lat.z = {z(0), z(1)};
    lat.v = {v(0), v(1)};
    lat.u = rng.uniform();
    return lat;
}

double potential_outcome(const DgpConfig& c, int d, int dprime, double v_own, double v_peer, double u) {
    const int a = arm_index(d, dprime);
    return c.intercept[a] + c.u_scale * u + c.own_loading[a] * v_own + c.peer_loading[a] * v_peer +
           c.interaction[a] * v_own * v_peer;
}

GroupRecord assemble_group(const DgpConfig& config, std::size_t g, const Latents& lat) {
    GroupRecord rec;
    rec.group_id = static_cast<std::int64_t>(g);
    for (int i = 0; i < 2; ++i) {
        const double index = config.threshold[i][0] * lat.z[0] + config.threshold[i][1] * lat.z[1];
        rec.d[i] = lat.v[i] <= index ? 1 : 0;
        rec.w[i] = {lat.z[i]};
    }
    for (int i = 0; i < 2; ++i) {
        const int j = peer_of(i);
        rec.y[i] = potential_outcome(config, rec.d[i], rec.d[j], lat.v[i], lat.v[j], lat.u);
    }
    return rec;
}

Dataset simulate_dataset(const DgpConfig& config, Exec exec, std::vector<Latents>* latents) {
    config.validate();
    Dataset data;
    data.groups.resize(config.G);
    data.layout = {1, 0};
    if (latents) latents->resize(config.G);
    for_each_index(config.G, exec, [&](std::size_t g) {
        const Latents lat = draw_latents(config, g);
        data.groups[g] = assemble_group(config, g, lat);
        if (latents) (*latents)[g] = lat;
    });
    return data;
}

double true_propensity(const DgpConfig& config, int unit, const std::array<double, 2>& z) {
    const double index = config.threshold[unit][0] * z[0] + config.threshold[unit][1] * z[1];
    return std_normal_cdf(index / config.sd_v(unit));
}

double true_mtr(const DgpConfig& config, int d, int dprime, double v_own, double v_peer) {
    const double t0 = config.sd_v(0) * std_normal_quantile(v_own);
    const double t1 = config.sd_v(1) * std_normal_quantile(v_peer);
    return potential_outcome(config, d, dprime, t0, t1, 0.5);
}

double true_mcse(const DgpConfig& config, int d, double v_own, double v_peer) {
    return true_mtr(config, d, 1, v_own, v_peer) - true_mtr(config, d, 0, v_own, v_peer);
}

double true_mcde(const DgpConfig& config, int d, double v_own, double v_peer) {
    return true_mtr(config, 1, d, v_own, v_peer) - true_mtr(config, 0, d, v_own, v_peer);
}

std::array<double, 4> true_alpha(const DgpConfig& config, int d, int dprime) {
    const int a = arm_index(d, dprime);
    const double s0 = config.sd_v(0), s1 = config.sd_v(1);
    return {config.intercept[a] + 0.5 * config.u_scale, config.own_loading[a] * s0, config.peer_loading[a] * s1,
            config.interaction[a] * s0 * s1};
}

double true_effect(TrueKind kind, int d, int dprime, double p0, double p1, const DgpConfig& config) {
    switch (kind) {
        case TrueKind::MCSE: return true_mcse(config, d, p0, p1);
        case TrueKind::MCDE: return true_mcde(config, d, p0, p1);
        case TrueKind::MTR: return true_mtr(config, d, dprime, p0, p1);
    }
    return 0.0;
}

NaiveMteModel fit_naive_mte(const Dataset& data, int unit, double bandwidth) {
    check_unit(unit);
    if (data.size() == 0) throw DataError("naive MTE needs a nonempty dataset");
    const std::size_t zdim = data.layout.z_dim;
    const MultiIndexBasis basis = build_multi_index_basis(static_cast<int>(zdim), 1);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(basis.size()));
    Eigen::VectorXi d(static_cast<Eigen::Index>(data.size()));
    for (std::size_t g = 0; g < data.size(); ++g) {
        const auto& w = data.groups[g].w[unit];
        const std::vector<double> z(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(zdim));
        X.row(static_cast<Eigen::Index>(g)) = basis.expand(z).transpose();
        d(static_cast<Eigen::Index>(g)) = data.groups[g].d[unit];
    }
    NaiveMteModel m;
    m.unit = unit;
    m.bandwidth = bandwidth;
    m.probit = fit_probit_design(X, d, basis, unit);
    const Eigen::VectorXd index = X * m.probit.theta;
    m.propensity.resize(data.size());
    m.outcome.resize(data.size());
    for (std::size_t g = 0; g < data.size(); ++g) {
        m.propensity[g] = propensity_from_index(index(static_cast<Eigen::Index>(g)));
        m.outcome[g] = data.groups[g].y[unit];
    }
    return m;
}

double evaluate_naive_mte(const NaiveMteModel& model, double p0) {
    return local_poly_1d(model.propensity, model.outcome, p0, model.bandwidth, 2)[1];
}

EffectSurface naive_mte(const Dataset& data, double bandwidth, int unit) {
    auto model = std::make_shared<const NaiveMteModel>(fit_naive_mte(data, unit, bandwidth));
    return {EffectKind::NaiveMTE, 1, -1, unit,
            [model](const EvalPoint& pt) { return evaluate_naive_mte(*model, pt.p0); }};
}

}  // namespace spillover
