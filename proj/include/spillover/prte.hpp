#pragma once

#include <array>
#include <vector>

#include "spillover/core_model.hpp"
#include "spillover/gaussian_copula.hpp"
#include "spillover/parallel.hpp"
#include "spillover/probit.hpp"

namespace spillover {

enum class PolicyKind { AbsoluteShift, ProportionalShift, InstrumentShift };

struct PolicySpec {
    PolicyKind kind = PolicyKind::AbsoluteShift;
    double eps = 0.0;
    int column = -1;  // index into the group input (w0, w1); InstrumentShift only

    static PolicySpec absolute(double e) { return {PolicyKind::AbsoluteShift, e, -1}; }
    static PolicySpec proportional(double e) { return {PolicyKind::ProportionalShift, e, -1}; }
    static PolicySpec instrument(int j, double e) { return {PolicyKind::InstrumentShift, e, j}; }
};

/// MCSE and MCDE surfaces for one member, indexed by d.
struct EffectSurfaces {
    std::array<EffectSurface, 2> mcse;
    std::array<EffectSurface, 2> mcde;
};

/// Propensity of member model.unit after adding eps to column j of the group input.
double counterfactual_propensity(const ProbitModel& model, const std::vector<double>& w, int j, double eps);

/// Post-policy propensity pairs. InstrumentShift needs the dataset and both probits.
std::vector<PropensityPair> apply_policy(const PolicySpec& policy, const std::vector<PropensityPair>& sample,
                                         const Dataset* data = nullptr, const ProbitModel* m0 = nullptr,
                                         const ProbitModel* m1 = nullptr);

/// Own or peer treatment path at one latent coordinate.
enum class Path { Stay1, Stay0, Up, Down };

/// Treatment path of a member whose latent is v when its propensity moves before -> after.
/// A tie (before == after) never moves.
Path member_path(double v, double before, double after);

/// Region of a (v_own, v_peer) point: 0 own moves/peer stays 0, 1 own stays 0/peer moves,
/// 2 own moves/peer stays 1, 3 own stays 1/peer moves, 4 both move, -1 nobody moves.
int transition_region(Path own, Path peer);

/// Coefficient of each surface (MCDE0, MCSE0, MCDE1, MCSE1) for one pair of paths.
std::array<double, 4> transition_coefficients(Path own, Path peer);

struct PrteResult {
    double delta_ey = 0.0;
    double delta_p = 0.0;
    double prte = 0.0;
    /// Fractions of groups with (own up, peer up), (up, down), (down, up), (down, down),
    /// where "up" means the propensity does not decrease.
    std::array<double, 4> strata{};
};

/// Composite Gauss-Legendre rule in normal scores on [-8, 8]: order/8 panels of 8 nodes.
struct ScoreGrid {
    std::vector<double> t;
    std::vector<double> w;
};
ScoreGrid prte_score_grid(int order);

inline constexpr int kDefaultPrteOrder = 128;

/// Region weights are built with two-dimensional difference arrays over the
/// quadrature nodes; surfaces are then evaluated once per node.
PrteResult prte_from_pairs(const EffectSurfaces& surfaces, const CopulaSpec& copula,
                           const std::vector<PropensityPair>& before, const std::vector<PropensityPair>& after,
                           int unit = 0, int order = kDefaultPrteOrder, Exec exec = Exec::Parallel);

/// Brute-force reference: classifies every group at every node.
PrteResult prte_reference(const EffectSurfaces& surfaces, const CopulaSpec& copula,
                          const std::vector<PropensityPair>& before, const std::vector<PropensityPair>& after,
                          int unit = 0, int order = kDefaultPrteOrder);

PrteResult prte(const PolicySpec& policy, const EffectSurfaces& surfaces, const CopulaSpec& copula,
                const std::vector<PropensityPair>& sample, const Dataset* data = nullptr,
                const ProbitModel* m0 = nullptr, const ProbitModel* m1 = nullptr, int unit = 0,
                int order = kDefaultPrteOrder, Exec exec = Exec::Parallel);

}  // namespace spillover
