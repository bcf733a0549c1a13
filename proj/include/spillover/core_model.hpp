#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace spillover {

/// One two-member group. Each w vector holds the member's instruments
/// followed by its x_dim covariates.
struct GroupRecord {
    std::int64_t group_id = 0;
    std::array<double, 2> y{0.0, 0.0};
    std::array<int, 2> d{0, 0};
    std::array<std::vector<double>, 2> w;
    std::size_t x_dim = 0;

    std::size_t z_dim() const { return w[0].size() - x_dim; }
};

struct Layout {
    std::size_t z_dim = 0;
    std::size_t x_dim = 0;
};

struct Dataset {
    std::vector<GroupRecord> groups;
    Layout layout;

    std::size_t size() const { return groups.size(); }
};

/// Fitted treatment probabilities of members 0 and 1 of one group.
struct PropensityPair {
    double p0 = 0.5;
    double p1 = 0.5;
};

struct EvalPoint {
    double p0 = 0.5;
    double p1 = 0.5;
    std::vector<double> x;
};

enum class EffectKind { MCSE, MCDE, MTR, NaiveMTE };

std::string to_string(EffectKind kind);

struct EffectSurface {
    EffectKind kind = EffectKind::MCSE;
    int d = 1;
    int dprime = -1;  // only meaningful for MTR surfaces
    int unit = 0;
    std::function<double(const EvalPoint&)> evaluator;

    double operator()(const EvalPoint& pt) const { return evaluator(pt); }
    double operator()(double p0, double p1) const { return evaluator(EvalPoint{p0, p1, {}}); }
};

Dataset validate_dataset(Dataset raw);

// Own/peer views. Unit i's own coordinate comes first.
inline int peer_of(int unit) { return 1 - unit; }
inline double own_p(const PropensityPair& pp, int unit) { return unit == 0 ? pp.p0 : pp.p1; }
inline double peer_p(const PropensityPair& pp, int unit) { return unit == 0 ? pp.p1 : pp.p0; }

/// Concatenated group input (w0, w1), the regressor vector for propensity models.
std::vector<double> group_input(const GroupRecord& g);

/// Member covariates stacked as (x_own, x_peer); length 2 * x_dim.
std::vector<double> group_covariates(const GroupRecord& g, int unit);

void check_unit(int unit);
void check_binary(int d, const char* what);

}  // namespace spillover
