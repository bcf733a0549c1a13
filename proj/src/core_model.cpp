#include "spillover/core_model.hpp"

#include <cmath>
#include <unordered_set>

#include "spillover/errors.hpp"

namespace spillover {

std::string to_string(EffectKind kind) {
    switch (kind) {
        case EffectKind::MCSE: return "MCSE";
        case EffectKind::MCDE: return "MCDE";
        case EffectKind::MTR: return "MTR";
        case EffectKind::NaiveMTE: return "naive-MTE";
    }
    return "unknown";
}

Dataset validate_dataset(Dataset raw) {
    if (raw.groups.empty()) throw DataError("dataset has no groups");
    const auto& first = raw.groups.front();
    const std::size_t wlen = first.w[0].size();
    const std::size_t xdim = first.x_dim;
    if (xdim > wlen) {
        throw DataError("ragged layout, group " + std::to_string(first.group_id) +
                        ": x_dim exceeds w length");
    }
    std::unordered_set<std::int64_t> seen;
    seen.reserve(raw.groups.size());
    for (const auto& g : raw.groups) {
        const std::string id = std::to_string(g.group_id);
        for (int i = 0; i < 2; ++i) {
            if (g.d[i] != 0 && g.d[i] != 1) throw DataError("non-binary treatment, group " + id);
        }
        for (int i = 0; i < 2; ++i) {
            if (!std::isfinite(g.y[i])) {
                throw DataError("non-finite outcome y" + std::to_string(i) + ", group " + id);
            }
        }
        if (g.w[0].size() != wlen || g.w[1].size() != wlen || g.x_dim != xdim) {
            throw DataError("ragged layout, group " + id);
        }
        for (int i = 0; i < 2; ++i) {
            for (std::size_t k = 0; k < wlen; ++k) {
                if (!std::isfinite(g.w[i][k])) {
                    throw DataError("non-finite w" + std::to_string(i) + "[" + std::to_string(k) +
                                    "], group " + id);
                }
            }
        }
        if (!seen.insert(g.group_id).second) throw DataError("duplicate group_id " + id);
    }
    raw.layout.x_dim = xdim;
    raw.layout.z_dim = wlen - xdim;
    return raw;
}

std::vector<double> group_input(const GroupRecord& g) {
    std::vector<double> out;
    out.reserve(g.w[0].size() * 2);
    out.insert(out.end(), g.w[0].begin(), g.w[0].end());
    out.insert(out.end(), g.w[1].begin(), g.w[1].end());
    return out;
}

std::vector<double> group_covariates(const GroupRecord& g, int unit) {
    std::vector<double> out;
    out.reserve(2 * g.x_dim);
    for (int m : {unit, peer_of(unit)}) {
        const auto& w = g.w[m];
        out.insert(out.end(), w.end() - static_cast<std::ptrdiff_t>(g.x_dim), w.end());
    }
    return out;
}

void check_unit(int unit) {
    if (unit != 0 && unit != 1) throw ConfigError("unit must be 0 or 1");
}

void check_binary(int d, const char* what) {
    if (d != 0 && d != 1) throw ConfigError(std::string(what) + " must be 0 or 1");
}

}  // namespace spillover
