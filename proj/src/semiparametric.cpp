#include "spillover/semiparametric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <set>

#include "spillover/errors.hpp"
#include "spillover/quadrature.hpp"
#include "spillover/rng.hpp"

namespace spillover {

namespace {

using Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

std::size_t count_distinct(const std::vector<double>& v, std::size_t stop_after) {
    std::set<double> seen;
    for (double x : v) {
        seen.insert(x);
        if (seen.size() > stop_after) break;
    }
    return seen.size();
}

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, std::uint64_t salt) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    CounterRng rng(derive_key(seed, stream::kFolds), salt);
    // Fisher-Yates with our own uniform draws keeps the order library-independent.
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
        std::swap(perm[i - 1], perm[std::min(j, i - 1)]);
    }
    return perm;
}

std::vector<double> penalty_weights_raw(const Eigen::MatrixXd& X) {
    std::vector<double> w(static_cast<std::size_t>(X.cols()));
    const double G = static_cast<double>(X.rows());
    for (Index j = 0; j < X.cols(); ++j) w[static_cast<std::size_t>(j)] = std::sqrt(X.col(j).squaredNorm() / G);
    return w;
}

std::vector<double> log_grid(double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    const double lo = 1e-4 * hi;
    for (int k = 0; k < n; ++k) {
        const double t = n == 1 ? 0.0 : static_cast<double>(k) / (n - 1);
        g[static_cast<std::size_t>(k)] = hi * std::pow(lo / hi, t);
    }
    return g;
}

}  // namespace

// ---------------------------------------------------------------- series

int SeriesModel::design_size() const {
    return 1 + static_cast<int>(bases.size()) * (kappa - 1) + static_cast<int>(discrete_cols.size());
}

Eigen::VectorXd SeriesModel::design_row(const std::vector<double>& input) const {
    Eigen::VectorXd row(design_size());
    Index c = 0;
    row(c++) = 1.0;
    for (std::size_t k = 0; k < bases.size(); ++k) {
        const auto vals = bases[k].evaluate(input[static_cast<std::size_t>(continuous_cols[k])]);
        for (std::size_t j = 1; j < vals.size(); ++j) row(c++) = vals[j];
    }
    for (int col : discrete_cols) row(c++) = input[static_cast<std::size_t>(col)];
    return row;
}

double SeriesModel::predict_raw(const GroupRecord& g) const { return design_row(group_input(g)).dot(coef); }

double SeriesModel::predict(const GroupRecord& g) const { return trim_propensity(predict_raw(g), trim_delta); }

Eigen::MatrixXd series_design(const SeriesModel& model, const Dataset& data) {
    Eigen::MatrixXd X(idx(data.size()), model.design_size());
    for (std::size_t g = 0; g < data.size(); ++g) X.row(idx(g)) = model.design_row(group_input(data.groups[g])).transpose();
    return X;
}

double lasso_lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& weights) {
    const double G = static_cast<double>(X.rows());
    const Eigen::VectorXd yc = y.array() - y.mean();
    double best = 0.0;
    for (Index j = 0; j < X.cols(); ++j) {
        if (!(weights(j) > 0.0)) continue;
        const Eigen::VectorXd xc = X.col(j).array() - X.col(j).mean();
        best = std::max(best, std::fabs(xc.dot(yc) / G) / weights(j));
    }
    return best;
}

Eigen::VectorXd lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                          double lambda, const Eigen::VectorXd* start, int max_sweeps, double tol) {
    const Index n = X.rows(), p = X.cols();
    if (y.size() != n || weights.size() != p) throw ConfigError("lasso: dimension mismatch");
    if (lambda < 0.0) throw ConfigError("lasso: lambda must be nonnegative");
    const double G = static_cast<double>(n);
    const Eigen::RowVectorXd xbar = X.colwise().mean();
    const Eigen::MatrixXd Xc = X.rowwise() - xbar;
    const double ybar = y.mean();
    Eigen::VectorXd theta = start ? *start : Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = (y.array() - ybar).matrix() - Xc * theta;
    Eigen::VectorXd cn(p);
    for (Index j = 0; j < p; ++j) cn(j) = Xc.col(j).squaredNorm() / G;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Index j = 0; j < p; ++j) {
            if (cn(j) <= 1e-14) {
                theta(j) = 0.0;
                continue;
            }
            const double old = theta(j);
            const double z = Xc.col(j).dot(r) / G + cn(j) * old;
            const double fresh = soft_threshold(z, lambda * weights(j)) / cn(j);
            if (fresh != old) {
                r.noalias() -= (fresh - old) * Xc.col(j);
                theta(j) = fresh;
                max_change = std::max(max_change, std::fabs(fresh - old) * std::sqrt(cn(j)));
            }
        }
        if (max_change < tol) break;
    }
    Eigen::VectorXd out(p + 1);
    out(0) = ybar - xbar.dot(theta);
    out.tail(p) = theta;
    return out;
}

double trim_propensity(double p_tilde, double delta) {
    if (!(delta > 0.0 && delta < 0.5)) throw ConfigError("trim delta must lie in (0, 0.5)");
    if (std::isnan(p_tilde)) throw NumericalError("series propensity is NaN");
    if (p_tilde >= 1.0) return 1.0 - delta;
    if (p_tilde <= 0.0) return delta;
    return p_tilde;
}

SeriesModel fit_series_propensity(const Dataset& data, int unit, const SeriesOptions& opts) {
    check_unit(unit);
    if (opts.kappa < 4) throw ConfigError("kappa must be at least 4");
    if (data.size() == 0) throw DataError("series propensity needs a nonempty dataset");
    (void)trim_propensity(0.5, opts.trim_delta);

    const std::size_t G = data.size();
    std::vector<std::vector<double>> inputs(G);
    for (std::size_t g = 0; g < G; ++g) inputs[g] = group_input(data.groups[g]);
    const std::size_t L = inputs[0].size();

    SeriesModel m;
    m.unit = unit;
    m.kappa = opts.kappa;
    m.trim_delta = opts.trim_delta;
    m.penalty = opts.penalty;
    for (std::size_t c = 0; c < L; ++c) {
        std::vector<double> col(G);
        for (std::size_t g = 0; g < G; ++g) col[g] = inputs[g][c];
        const auto threshold = static_cast<std::size_t>(std::max(opts.discrete_threshold, opts.kappa));
        const std::size_t distinct = count_distinct(col, threshold);
        if (distinct <= 1) continue;  // constant columns are absorbed by the intercept
        if (distinct <= static_cast<std::size_t>(opts.discrete_threshold)) {
            m.discrete_cols.push_back(static_cast<int>(c));
        } else if (distinct < static_cast<std::size_t>(opts.kappa)) {
            throw DataError("input column " + std::to_string(c) + " has fewer than kappa distinct values");
        } else {
            m.continuous_cols.push_back(static_cast<int>(c));
            m.bases.push_back(quantile_bspline(col, opts.kappa));
        }
    }

    const Eigen::MatrixXd X = series_design(m, data);
    Eigen::VectorXd y(idx(G));
    for (std::size_t g = 0; g < G; ++g) y(idx(g)) = data.groups[g].d[unit];

    if (opts.penalty == Penalty::None) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
        qr.setThreshold(1e-10);
        if (qr.rank() < X.cols()) {
            throw NumericalError("singular series design for unit " + std::to_string(unit) + " (rank " +
                                 std::to_string(qr.rank()) + " of " + std::to_string(X.cols()) +
                                 "): use the l1 penalty or reduce kappa");
        }
        m.coef = qr.solve(y);
        return m;
    }

    // l1 path on the non-intercept columns with weights |p_j|_G / kappa-tilde.
    const Eigen::MatrixXd Xs = X.rightCols(X.cols() - 1);
    const auto raw = penalty_weights_raw(Xs);
    Eigen::VectorXd w(Xs.cols());
    for (Index j = 0; j < Xs.cols(); ++j) w(j) = raw[static_cast<std::size_t>(j)] / static_cast<double>(Xs.cols());

    double lambda = opts.lambda;
    if (opts.penalty == Penalty::L1CV) {
        if (opts.folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
        if (G < static_cast<std::size_t>(opts.folds) * 2) throw DataError("too few groups for cross-validation");
        const auto grid = log_grid(std::max(lasso_lambda_max(Xs, y, w), 1e-12), opts.grid_size);
        const auto perm = shuffled_indices(G, opts.seed, static_cast<std::uint64_t>(unit));
        std::vector<int> fold_of(G);
        for (std::size_t k = 0; k < G; ++k) fold_of[perm[k]] = static_cast<int>(k % static_cast<std::size_t>(opts.folds));
        std::vector<std::vector<double>> sse(static_cast<std::size_t>(opts.folds),
                                             std::vector<double>(grid.size(), 0.0));
        for_each_index(static_cast<std::size_t>(opts.folds), Exec::Parallel, [&](std::size_t f) {
            std::vector<Index> tr, te;
            for (std::size_t g = 0; g < G; ++g) (fold_of[g] == static_cast<int>(f) ? te : tr).push_back(idx(g));
            const Eigen::MatrixXd Xtr = Xs(tr, Eigen::all);
            const Eigen::VectorXd ytr = y(tr);
            const Eigen::MatrixXd Xte = Xs(te, Eigen::all);
            const Eigen::VectorXd yte = y(te);
            Eigen::VectorXd warm = Eigen::VectorXd::Zero(Xs.cols());
            for (std::size_t k = 0; k < grid.size(); ++k) {
                const Eigen::VectorXd fit = lasso_fit(Xtr, ytr, w, grid[k], &warm);
                warm = fit.tail(Xs.cols());
                const Eigen::VectorXd pred = (Xte * warm).array() + fit(0);
                sse[f][k] = (yte - pred).squaredNorm();
            }
        });
        double best = std::numeric_limits<double>::infinity();
        lambda = grid.front();
        for (std::size_t k = 0; k < grid.size(); ++k) {
            double total = 0.0;
            for (const auto& s : sse) total += s[k];
            if (total < best - 1e-12 * std::fabs(best)) {
                best = total;
                lambda = grid[k];
            }
        }
        // Warm-started path on the full sample down to the chosen lambda.
        Eigen::VectorXd warm = Eigen::VectorXd::Zero(Xs.cols());
        for (double lam : grid) {
            if (lam < lambda) break;
            warm = lasso_fit(Xs, y, w, lam, &warm).tail(Xs.cols());
        }
        m.coef = lasso_fit(Xs, y, w, lambda, &warm);
    } else {
        if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
        m.coef = lasso_fit(Xs, y, w, lambda);
    }
    m.lambda = lambda;
    return m;
}

std::vector<PropensityPair> series_propensity_pairs(const SeriesModel& m0, const SeriesModel& m1,
                                                    const Dataset& data) {
    std::vector<PropensityPair> out(data.size());
    for (std::size_t g = 0; g < data.size(); ++g) out[g] = {m0.predict(data.groups[g]), m1.predict(data.groups[g])};
    return out;
}

std::vector<Point2> oriented_points(const std::vector<PropensityPair>& props, int unit) {
    check_unit(unit);
    std::vector<Point2> pts(props.size());
    for (std::size_t g = 0; g < props.size(); ++g) pts[g] = {own_p(props[g], unit), peer_p(props[g], unit)};
    return pts;
}

// ---------------------------------------------------------------- local fits

std::vector<DensityEstimate> estimate_copula_density_semiparam(const Dataset& data,
                                                               const std::vector<PropensityPair>& props,
                                                               const std::vector<Point2>& grid, double h,
                                                               KernelType kernel, Exec exec) {
    if (props.size() != data.size()) throw DataError("propensities and dataset differ in length");
    const auto pts = oriented_points(props, 0);
    std::vector<double> dd(data.size());
    for (std::size_t g = 0; g < data.size(); ++g) dd[g] = data.groups[g].d[0] * data.groups[g].d[1];
    std::vector<DensityEstimate> out(grid.size());
    for_each_index(grid.size(), exec, [&](std::size_t k) {
        auto& e = out[k];
        e.point = grid[k];
        if (!(grid[k][0] > 0.0 && grid[k][0] < 1.0 && grid[k][1] > 0.0 && grid[k][1] < 1.0)) {
            e.error = "grid point outside the open unit square";
            return;
        }
        try {
            e.value = local_cubic_fit(pts, dd, grid[k], h, kernel).cross_partial();
            e.ok = true;
            e.nonnegative = e.value >= 0.0;
        } catch (const Error& err) {
            e.error = err.what();
        }
    });
    return out;
}

Eigen::VectorXd fit_partial_linear_beta(const Dataset& data, const std::vector<PropensityPair>& props, int unit,
                                        double h, std::optional<int> arm, KernelType kernel, Exec exec) {
    check_unit(unit);
    if (props.size() != data.size()) throw DataError("propensities and dataset differ in length");
    if (data.layout.x_dim < 1) throw ConfigError("partial-linear fit needs at least one covariate");
    const int peer = peer_of(unit);
    std::vector<std::size_t> keep;
    for (std::size_t g = 0; g < data.size(); ++g) {
        const auto& gr = data.groups[g];
        if (!arm || arm_index(gr.d[unit], gr.d[peer]) == *arm) keep.push_back(g);
    }
    const std::size_t n = keep.size();
    const std::size_t k = 2 * data.layout.x_dim;
    if (n <= k) throw NumericalError("rank-deficient residualized design: too few groups in the arm");
    std::vector<Point2> pts(n);
    Eigen::MatrixXd X(idx(n), idx(k));
    Eigen::VectorXd y(idx(n));
    for (std::size_t r = 0; r < n; ++r) {
        const auto& gr = data.groups[keep[r]];
        pts[r] = {own_p(props[keep[r]], unit), peer_p(props[keep[r]], unit)};
        const auto x = group_covariates(gr, unit);
        for (std::size_t j = 0; j < k; ++j) X(idx(r), idx(j)) = x[j];
        y(idx(r)) = gr.y[unit];
    }
    Eigen::MatrixXd Xt(idx(n), idx(k));
    Eigen::VectorXd yt(idx(n));
    for_each_index(n, exec, [&](std::size_t r) {
        double den = 0.0, ny = 0.0;
        Eigen::VectorXd nx = Eigen::VectorXd::Zero(idx(k));
        for (std::size_t s = 0; s < n; ++s) {
            const double w = kernel_value(kernel, (pts[s][0] - pts[r][0]) / h) *
                             kernel_value(kernel, (pts[s][1] - pts[r][1]) / h);
            if (w == 0.0) continue;
            den += w;
            ny += w * y(idx(s));
            nx.noalias() += w * X.row(idx(s)).transpose();
        }
        Xt.row(idx(r)) = X.row(idx(r)) - (nx / den).transpose();
        yt(idx(r)) = y(idx(r)) - ny / den;
    });
    const double scale = std::max(1.0, X.norm());
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xt);
    qr.setThreshold(1e-10);
    if (Xt.norm() <= 1e-10 * scale || qr.rank() < idx(k)) {
        throw NumericalError("rank-deficient residualized design for unit " + std::to_string(unit));
    }
    return qr.solve(yt);
}

std::vector<double> signed_arm_residuals(const Dataset& data, const Eigen::VectorXd& beta, int unit, int d,
                                         int dprime) {
    check_unit(unit);
    check_binary(d, "d");
    check_binary(dprime, "dprime");
    const int peer = peer_of(unit);
    const double sgn = sign_factor(d, dprime);
    std::vector<double> out(data.size(), 0.0);
    for (std::size_t g = 0; g < data.size(); ++g) {
        const auto& gr = data.groups[g];
        if (gr.d[unit] != d || gr.d[peer] != dprime) continue;
        double xb = 0.0;
        if (beta.size() > 0) {
            const auto x = group_covariates(gr, unit);
            if (x.size() != static_cast<std::size_t>(beta.size())) throw ConfigError("beta length does not match covariates");
            for (std::size_t j = 0; j < x.size(); ++j) xb += x[j] * beta(idx(j));
        }
        out[g] = sgn * (gr.y[unit] - xb);
    }
    return out;
}

namespace {

std::vector<double> joint_treatment(const Dataset& data) {
    std::vector<double> dd(data.size());
    for (std::size_t g = 0; g < data.size(); ++g) dd[g] = data.groups[g].d[0] * data.groups[g].d[1];
    return dd;
}

double xbeta_at(const Eigen::VectorXd& beta, const std::vector<double>& x) {
    if (x.empty() || beta.size() == 0) return 0.0;
    if (x.size() != static_cast<std::size_t>(beta.size())) throw ConfigError("target covariates do not match beta");
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += x[j] * beta(idx(j));
    return s;
}

LocalFit guarded_denominator(const std::vector<Point2>& pts, const std::vector<double>& dd, Point2 target, double h1,
                             KernelType kernel) {
    LocalFit den = local_cubic_fit(pts, dd, target, h1, kernel);
    if (std::fabs(den.cross_partial()) < kDenominatorGuard) {
        throw NumericalError("denominator-near-zero: b4 = " + std::to_string(den.cross_partial()) + " at (" +
                             std::to_string(target[0]) + ", " + std::to_string(target[1]) + ")");
    }
    return den;
}

}  // namespace

SemiparamMtr semiparam_mtr(const Dataset& data, const std::vector<PropensityPair>& props,
                           const Eigen::VectorXd& beta, int unit, int d, int dprime, const EvalPoint& target,
                           double h1, double h2, KernelType kernel) {
    if (props.size() != data.size()) throw DataError("propensities and dataset differ in length");
    const auto pts = oriented_points(props, unit);
    const Point2 t{target.p0, target.p1};
    SemiparamMtr out;
    out.denominator = guarded_denominator(pts, joint_treatment(data), t, h1, kernel);
    out.numerator = local_cubic_fit(pts, signed_arm_residuals(data, beta, unit, d, dprime), t, h2, kernel);
    out.b4 = out.denominator.cross_partial();
    out.c4 = out.numerator.cross_partial();
    out.xbeta = xbeta_at(beta, target.x);
    out.value = out.xbeta + out.c4 / out.b4;
    return out;
}

// ---------------------------------------------------------------- variance

double KernelMoments::sandwich_cross() const {
    Eigen::FullPivLU<Eigen::Matrix<double, 10, 10>> lu(M);
    if (!lu.isInvertible()) throw NumericalError("singular kernel moment matrix");
    const Eigen::Matrix<double, 10, 10> Minv = lu.inverse();
    return (Minv * Gamma * Minv)(kCrossIndex, kCrossIndex);
}

KernelMoments kernel_moment_matrices(KernelType kernel, int order) {
    std::vector<double> nodes, wk, wk2;
    if (kernel_compact(kernel)) {
        const auto& r = cached_gauss_legendre(order);
        for (std::size_t i = 0; i < r.nodes.size(); ++i) {
            const double k = kernel_value(kernel, r.nodes[i]);
            nodes.push_back(r.nodes[i]);
            wk.push_back(r.weights[i] * k);
            wk2.push_back(r.weights[i] * k * k);
        }
    } else {
        // Gaussian kernel: K(u) du is the N(0,1) measure, K(u)^2 du is exp(-u^2)/(2 pi) du.
        const auto& r = cached_gauss_hermite(order);
        const double pi = std::acos(-1.0);
        for (std::size_t i = 0; i < r.nodes.size(); ++i) {
            nodes.push_back(std::sqrt(2.0) * r.nodes[i]);
            wk.push_back(r.weights[i] / std::sqrt(pi));
            wk2.push_back(0.0);
        }
        for (std::size_t i = 0; i < r.nodes.size(); ++i) {
            nodes.push_back(r.nodes[i]);
            wk.push_back(0.0);
            wk2.push_back(r.weights[i] / (2.0 * pi));
        }
    }
    KernelMoments km;
    km.M.setZero();
    km.Gamma.setZero();
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        for (std::size_t b = 0; b < nodes.size(); ++b) {
            const double u0 = nodes[a], u1 = nodes[b];
            const Eigen::Matrix<double, 10, 1> phi{1.0, u0, u1, u0 * u0, u0 * u1, u1 * u1, u0 * u0 * u0,
                                                   u0 * u0 * u1, u0 * u1 * u1, u1 * u1 * u1};
            const Eigen::Matrix<double, 10, 10> outer = phi * phi.transpose();
            if (wk[a] * wk[b] != 0.0) km.M += wk[a] * wk[b] * outer;
            if (wk2[a] * wk2[b] != 0.0) km.Gamma += wk2[a] * wk2[b] * outer;
        }
    }
    return km;
}

double cross_derivative_variance(KernelType kernel, double h, std::size_t G, double sigma2, double density) {
    if (!(h > 0.0) || G == 0 || !(density > 0.0) || sigma2 < 0.0) {
        throw ConfigError("variance inputs must be positive");
    }
    const double s = kernel_moment_matrices(kernel).sandwich_cross();
    return sigma2 * s / (density * static_cast<double>(G) * std::pow(h, 6));
}

double asymptotic_variance(KernelType kernel, double h2, std::size_t G, double b4_hat, double sigma2_hat,
                           double density_hat) {
    if (b4_hat == 0.0) throw ConfigError("variance inputs must be positive");
    return cross_derivative_variance(kernel, h2, G, sigma2_hat, density_hat) / (b4_hat * b4_hat);
}

// ---------------------------------------------------------------- bandwidth

BandwidthChoice select_bandwidth(const std::vector<Point2>& points, const std::vector<double>& responses,
                                 std::vector<double> grid, int folds, std::uint64_t seed, KernelType kernel,
                                 std::size_t max_eval_per_fold, Exec exec) {
    if (grid.empty()) throw ConfigError("bandwidth grid is empty");
    if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (points.size() != responses.size()) throw DataError("points and responses differ in length");
    if (points.size() < static_cast<std::size_t>(folds) * 10) throw ConfigError("too few observations for bandwidth CV");
    std::sort(grid.begin(), grid.end());
    const std::size_t n = points.size();
    const auto perm = shuffled_indices(n, seed, 0);
    std::vector<int> fold_of(n);
    for (std::size_t k = 0; k < n; ++k) fold_of[perm[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));

    struct FoldData {
        std::vector<Point2> train_pts;
        std::vector<double> train_y;
        std::vector<std::size_t> eval;
    };
    std::vector<FoldData> fd(static_cast<std::size_t>(folds));
    for (std::size_t g = 0; g < n; ++g) {
        for (std::size_t o = 0; o < fd.size(); ++o) {
            if (o == static_cast<std::size_t>(fold_of[g])) continue;
            fd[o].train_pts.push_back(points[g]);
            fd[o].train_y.push_back(responses[g]);
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        auto& f = fd[static_cast<std::size_t>(fold_of[perm[k]])];
        if (f.eval.size() < max_eval_per_fold) f.eval.push_back(perm[k]);
    }

    const std::size_t H = grid.size(), F = fd.size();
    std::vector<double> sse(H * F, 0.0);
    for_each_index(H * F, exec, [&](std::size_t job) {
        const std::size_t hi = job / F, f = job % F;
        double acc = 0.0;
        for (std::size_t g : fd[f].eval) {
            try {
                const double pred = local_cubic_fit(fd[f].train_pts, fd[f].train_y, points[g], grid[hi], kernel).mean();
                acc += (responses[g] - pred) * (responses[g] - pred);
            } catch (const NumericalError&) {
                acc = std::numeric_limits<double>::infinity();
                break;
            }
        }
        sse[job] = acc;
    });

    BandwidthChoice out;
    out.grid = grid;
    out.cv_error.assign(H, 0.0);
    for (std::size_t hi = 0; hi < H; ++hi)
        for (std::size_t f = 0; f < F; ++f) out.cv_error[hi] += sse[hi * F + f];
    double best = std::numeric_limits<double>::infinity();
    out.h = grid.back();
    for (std::size_t k = H; k-- > 0;) {
        // Scanning from the largest h, a smaller one must win by more than rounding.
        if (std::isinf(best) ? out.cv_error[k] < best : out.cv_error[k] < best - 1e-12 * std::fabs(best)) {
            best = out.cv_error[k];
            out.h = grid[k];
        }
    }
    return out;
}

// ---------------------------------------------------------------- end to end

SemiparamFit fit_semiparametric(const Dataset& data, const SemiparamConfig& cfg, Exec exec) {
    check_unit(cfg.unit);
    SemiparamFit fit;
    fit.unit = cfg.unit;
    fit.kernel = cfg.kernel;
    fit.series0 = fit_series_propensity(data, 0, cfg.series);
    fit.series1 = fit_series_propensity(data, 1, cfg.series);
    fit.props = series_propensity_pairs(fit.series0, fit.series1, data);
    const auto pts = oriented_points(fit.props, cfg.unit);
    if (cfg.cv_bandwidth) {
        fit.h1 = select_bandwidth(pts, joint_treatment(data), cfg.h_grid, 5, cfg.series.seed, cfg.kernel, 100, exec).h;
        std::vector<double> y(data.size());
        for (std::size_t g = 0; g < data.size(); ++g) y[g] = data.groups[g].y[cfg.unit];
        fit.h2 = constrain_h2(select_bandwidth(pts, y, cfg.h_grid, 5, cfg.series.seed, cfg.kernel, 100, exec).h, fit.h1);
    } else {
        fit.h1 = cfg.h1;
        fit.h2 = cfg.h2;
    }
    for (int a = 0; a < 4; ++a) {
        fit.beta[static_cast<std::size_t>(a)] =
            data.layout.x_dim > 0 ? fit_partial_linear_beta(data, fit.props, cfg.unit, cfg.h_beta, a, cfg.kernel, exec)
                                  : Eigen::VectorXd();
    }
    return fit;
}

namespace {

struct SurfaceState {
    std::vector<Point2> pts;
    std::vector<double> dd;
    std::array<std::vector<double>, 4> resid;
    std::array<Eigen::VectorXd, 4> beta;
    double h1 = 0.0, h2 = 0.0;
    KernelType kernel = KernelType::Epanechnikov;

    double ratio(int a, Point2 t, double b4) const {
        return local_cubic_fit(pts, resid[static_cast<std::size_t>(a)], t, h2, kernel).cross_partial() / b4;
    }
    double mtr(int d, int dp, const EvalPoint& e, double b4) const {
        const int a = arm_index(d, dp);
        return xbeta_at(beta[static_cast<std::size_t>(a)], e.x) + ratio(a, {e.p0, e.p1}, b4);
    }
    double b4(const EvalPoint& e) const { return guarded_denominator(pts, dd, {e.p0, e.p1}, h1, kernel).cross_partial(); }
};

}  // namespace

EffectSurface semiparam_surface(const Dataset& data, const SemiparamFit& fit, EffectKind kind, int d, int dprime) {
    check_binary(d, "d");
    auto st = std::make_shared<SurfaceState>();
    st->pts = oriented_points(fit.props, fit.unit);
    st->dd = joint_treatment(data);
    for (int a = 0; a < 4; ++a) {
        st->resid[static_cast<std::size_t>(a)] =
            signed_arm_residuals(data, fit.beta[static_cast<std::size_t>(a)], fit.unit, a / 2, a % 2);
        st->beta[static_cast<std::size_t>(a)] = fit.beta[static_cast<std::size_t>(a)];
    }
    st->h1 = fit.h1;
    st->h2 = fit.h2;
    st->kernel = fit.kernel;
    std::function<double(const EvalPoint&)> f;
    switch (kind) {
        case EffectKind::MTR:
            check_binary(dprime, "dprime");
            f = [st, d, dprime](const EvalPoint& e) { return st->mtr(d, dprime, e, st->b4(e)); };
            break;
        case EffectKind::MCSE:
            f = [st, d](const EvalPoint& e) {
                const double b4 = st->b4(e);
                return st->mtr(d, 1, e, b4) - st->mtr(d, 0, e, b4);
            };
            break;
        case EffectKind::MCDE:
            f = [st, d](const EvalPoint& e) {
                const double b4 = st->b4(e);
                return st->mtr(1, d, e, b4) - st->mtr(0, d, e, b4);
            };
            break;
        default: throw ConfigError("semiparametric surfaces cover MTR, MCSE and MCDE only");
    }
    return {kind, d, dprime, fit.unit, std::move(f)};
}

PointVariance semiparam_point_variance(const Dataset& data, const SemiparamFit& fit, int d, int dprime,
                                       Point2 target) {
    const auto pts = oriented_points(fit.props, fit.unit);
    const LocalFit den = guarded_denominator(pts, joint_treatment(data), target, fit.h1, fit.kernel);
    const auto resid = signed_arm_residuals(data, fit.beta[static_cast<std::size_t>(arm_index(d, dprime))], fit.unit,
                                            d, dprime);
    const LocalFit num = local_cubic_fit(pts, resid, target, fit.h2, fit.kernel);
    PointVariance pv;
    pv.b4 = den.cross_partial();
    pv.estimate = num.cross_partial() / pv.b4;
    pv.sigma2 = num.residual_variance;
    pv.density = kernel_density_2d(pts, target, fit.h2, fit.kernel);
    pv.variance = asymptotic_variance(fit.kernel, fit.h2, data.size(), pv.b4, pv.sigma2, pv.density);
    return pv;
}

}  // namespace spillover
