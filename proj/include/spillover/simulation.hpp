#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "spillover/core_model.hpp"
#include "spillover/parallel.hpp"
#include "spillover/probit.hpp"

namespace spillover {

/// Two-member DGP. Potential outcomes for member i in arm (own d, peer d'):
///   Y(d,d') = intercept[a] + u_scale*U + own[a]*Vt_i + peer[a]*Vt_-i + interaction[a]*Vt_i*Vt_-i,
/// with a = arm_index(d, d'), and D_i = 1{Vt_i <= threshold[i] . (Z0, Z1)}.
struct DgpConfig {
    std::size_t G = 1000;
    std::uint64_t seed = 1;
    Eigen::Matrix2d sigma_z;
    Eigen::Matrix2d sigma_v;
    std::array<std::array<double, 2>, 2> threshold{{{1.0, 0.5}, {-0.5, 1.0}}};
    std::array<double, 4> intercept{2.0, 3.0, 3.0, 1.0};  // arm_index order: (0,0),(0,1),(1,0),(1,1)
    std::array<double, 4> own_loading{2.0, 2.0, 2.0, 2.0};
    std::array<double, 4> peer_loading{0.0, 0.0, 1.0, 1.0};
    std::array<double, 4> interaction{-1.0, -1.0, -1.0, -1.0};
    double u_scale = 0.5;

    DgpConfig();
    /// Spillover-free variant: independent latents, own-instrument thresholds,
    /// outcomes that ignore the peer's treatment and latent.
    static DgpConfig sutva();

    void validate() const;
    double rho() const;
    double sd_v(int unit) const { return std::sqrt(sigma_v(unit, unit)); }
};

struct Latents {
    std::array<double, 2> z{};
    std::array<double, 2> v{};
    double u = 0.0;
};

/// Per-group streams make the dataset independent of thread count.
Dataset simulate_dataset(const DgpConfig& config, Exec exec = Exec::Parallel, std::vector<Latents>* latents = nullptr);

/// Draws for one group from its own counter stream.
Latents draw_latents(const DgpConfig& config, std::size_t g);
GroupRecord assemble_group(const DgpConfig& config, std::size_t g, const Latents& lat);
double potential_outcome(const DgpConfig& config, int d, int dprime, double v_own, double v_peer, double u);

double true_propensity(const DgpConfig& config, int unit, const std::array<double, 2>& z);

/// Closed-form oracle surfaces for member 0 at latent quantiles (v_own, v_peer).
double true_mtr(const DgpConfig& config, int d, int dprime, double v_own, double v_peer);
double true_mcse(const DgpConfig& config, int d, double v_own, double v_peer);
double true_mcde(const DgpConfig& config, int d, double v_own, double v_peer);
/// (alpha0..alpha3) implied for arm (d, d').
std::array<double, 4> true_alpha(const DgpConfig& config, int d, int dprime);

enum class TrueKind { MCSE, MCDE, MTR };
double true_effect(TrueKind kind, int d, int dprime, double p0, double p1, const DgpConfig& config);

/// Naive MTE: probit of D_i on member i's own instruments, then the slope of a
/// local quadratic fit of Y_i on the fitted one-dimensional propensity.
struct NaiveMteModel {
    int unit = 0;
    ProbitModel probit;
    std::vector<double> propensity;
    std::vector<double> outcome;
    double bandwidth = 0.3;
};

NaiveMteModel fit_naive_mte(const Dataset& data, int unit, double bandwidth);
double evaluate_naive_mte(const NaiveMteModel& model, double p0);
EffectSurface naive_mte(const Dataset& data, double bandwidth, int unit = 0);

}  // namespace spillover
