#include "spillover/bspline.hpp"

#include <algorithm>
#include <cmath>

#include "spillover/errors.hpp"

namespace spillover {

BSplineBasis::BSplineBasis(std::vector<double> interior, double lo, double hi, int degree)
    : lo_(lo), hi_(hi), degree_(degree) {
    if (!(hi > lo)) throw DataError("B-spline range is degenerate");
    if (!std::is_sorted(interior.begin(), interior.end())) throw DataError("B-spline knots must be nondecreasing");
    knots_.assign(static_cast<std::size_t>(degree + 1), lo);
    knots_.insert(knots_.end(), interior.begin(), interior.end());
    knots_.insert(knots_.end(), static_cast<std::size_t>(degree + 1), hi);
}

std::vector<double> BSplineBasis::evaluate(double x) const {
    const int n = size();
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    x = std::clamp(x, lo_, hi_);
    // Span index s with knots[s] <= x < knots[s+1]; the right end uses the last span.
    int s = static_cast<int>(std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin()) - 1;
    s = std::min(s, n - 1);
    s = std::max(s, degree_);
    // de Boor's triangular recurrence for the degree_+1 nonzero functions.
    std::vector<double> N(static_cast<std::size_t>(degree_ + 1), 0.0), left(N.size()), right(N.size());
    N[0] = 1.0;
    for (int j = 1; j <= degree_; ++j) {
        left[j] = x - knots_[s + 1 - j];
        right[j] = knots_[s + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[r + 1] + left[j - r];
            const double temp = denom > 0.0 ? N[r] / denom : 0.0;
            N[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        N[j] = saved;
    }
    for (int r = 0; r <= degree_; ++r) out[static_cast<std::size_t>(s - degree_ + r)] = N[r];
    return out;
}

BSplineBasis quantile_bspline(const std::vector<double>& sample, int kappa, int degree) {
    if (kappa < degree + 1) throw ConfigError("kappa must be at least degree + 1");
    if (sample.empty()) throw DataError("B-spline needs a nonempty sample");
    std::vector<double> sorted = sample;
    std::sort(sorted.begin(), sorted.end());
    const int n_interior = kappa - degree - 1;
    std::vector<double> interior;
    for (int j = 1; j <= n_interior; ++j) {
        const double q = static_cast<double>(j) / (n_interior + 1);
        const double h = q * (static_cast<double>(sorted.size()) - 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const double v = lo + 1 < sorted.size() ? sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]) : sorted.back();
        interior.push_back(v);
    }
    return BSplineBasis(std::move(interior), sorted.front(), sorted.back(), degree);
}

}  // namespace spillover
