#include "spillover/cli_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "spillover/diagnostics.hpp"
#include "spillover/errors.hpp"
#include "spillover/inference.hpp"
#include "spillover/local_effects.hpp"
#include "spillover/mtr_parametric.hpp"
#include "spillover/parallel.hpp"
#include "spillover/pipeline.hpp"
#include "spillover/prte.hpp"
#include "spillover/semiparametric.hpp"
#include "spillover/simulation.hpp"

namespace spillover {

using json = nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
bool parse_number(const std::string& s, T& value) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc() && ptr == last;
}

struct ColumnIndex {
    std::map<std::string, std::size_t> pos;

    bool has(const std::string& name) const { return pos.count(name) > 0; }
    std::size_t at(const std::string& name) const { return pos.at(name); }
};

std::size_t count_block(const ColumnIndex& cols, const std::string& prefix) {
    std::size_t k = 0;
    while (cols.has(prefix + std::to_string(k + 1))) ++k;
    return k;
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

Dataset read_dataset_csv(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        header = split(t, ',');
        break;
    }
    if (header.empty()) throw DataError(source + ": no header row");

    ColumnIndex cols;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (!cols.pos.emplace(header[j], j).second) {
            throw DataError(source + ": duplicate column '" + header[j] + "'");
        }
    }
    const std::size_t kz = std::max(count_block(cols, "z0_"), count_block(cols, "z1_"));
    const std::size_t kx = std::max(count_block(cols, "x0_"), count_block(cols, "x1_"));
    std::vector<std::string> missing;
    for (const char* base : {"group_id", "y0", "y1", "d0", "d1"}) {
        if (!cols.has(base)) missing.emplace_back(base);
    }
    if (kz == 0) missing.emplace_back("z0_1");
    for (const char* block : {"z0_", "z1_"}) {
        for (std::size_t j = 1; j <= kz; ++j) {
            if (!cols.has(block + std::to_string(j))) missing.push_back(block + std::to_string(j));
        }
    }
    for (const char* block : {"x0_", "x1_"}) {
        for (std::size_t j = 1; j <= kx; ++j) {
            if (!cols.has(block + std::to_string(j))) missing.push_back(block + std::to_string(j));
        }
    }
    if (!missing.empty()) {
        std::string msg = source + ": schema mismatch, missing columns:";
        for (const auto& m : missing) msg += " " + m;
        throw DataError(msg);
    }

    Dataset raw;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto fields = split(t, ',');
        const std::string where = source + ":" + std::to_string(line_no);
        if (fields.size() != header.size()) {
            throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(fields.size()));
        }
        auto real = [&](const std::string& name) {
            double v = 0.0;
            const auto& s = fields[cols.at(name)];
            if (!parse_number(s, v)) throw DataError(where + ": column " + name + ": cannot parse '" + s + "'");
            return v;
        };
        auto integer = [&](const std::string& name) {
            long long v = 0;
            const auto& s = fields[cols.at(name)];
            if (!parse_number(s, v)) throw DataError(where + ": column " + name + ": cannot parse '" + s + "' as an integer");
            return v;
        };
        GroupRecord g;
        g.group_id = integer("group_id");
        g.y = {real("y0"), real("y1")};
        for (int i = 0; i < 2; ++i) {
            const long long d = integer("d" + std::to_string(i));
            if (d != 0 && d != 1) throw DataError(where + ": column d" + std::to_string(i) + ": treatment must be 0 or 1");
            g.d[static_cast<std::size_t>(i)] = static_cast<int>(d);
        }
        g.x_dim = kx;
        for (int i = 0; i < 2; ++i) {
            auto& w = g.w[static_cast<std::size_t>(i)];
            for (std::size_t j = 1; j <= kz; ++j) w.push_back(real("z" + std::to_string(i) + "_" + std::to_string(j)));
            for (std::size_t j = 1; j <= kx; ++j) w.push_back(real("x" + std::to_string(i) + "_" + std::to_string(j)));
        }
        raw.groups.push_back(std::move(g));
    }
    return validate_dataset(std::move(raw));
}

Dataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return read_dataset_csv(in, path);
}

void write_dataset_csv(std::ostream& os, const Dataset& data, const std::vector<std::string>& comments) {
    for (const auto& c : comments) os << "# " << c << '\n';
    const std::size_t kx = data.layout.x_dim;
    const std::size_t kz = data.layout.z_dim;
    os << "group_id,y0,y1,d0,d1";
    for (const char* block : {"z0_", "z1_"}) {
        for (std::size_t j = 1; j <= kz; ++j) os << ',' << block << j;
    }
    for (const char* block : {"x0_", "x1_"}) {
        for (std::size_t j = 1; j <= kx; ++j) os << ',' << block << j;
    }
    os << '\n';
    for (const auto& g : data.groups) {
        os << g.group_id << ',' << format_double(g.y[0]) << ',' << format_double(g.y[1]) << ',' << g.d[0] << ','
           << g.d[1];
        for (int i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < kz; ++j) os << ',' << format_double(g.w[static_cast<std::size_t>(i)][j]);
        }
        for (int i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < kx; ++j) os << ',' << format_double(g.w[static_cast<std::size_t>(i)][kz + j]);
        }
        os << '\n';
    }
}

std::vector<double> parse_grid(const std::string& spec) {
    const auto parts = split(spec, ':');
    double a = 0.0, b = 0.0;
    long long n = 0;
    if (parts.size() == 1) {
        if (!parse_number(parts[0], a)) throw ConfigError("bad grid '" + spec + "'");
        return {a};
    }
    if (parts.size() != 3 || !parse_number(parts[0], a) || !parse_number(parts[1], b) || !parse_number(parts[2], n)) {
        throw ConfigError("bad grid '" + spec + "': expected lo:hi:n");
    }
    if (n < 1) throw ConfigError("bad grid '" + spec + "': n must be positive");
    if (n == 1) return {a};
    std::vector<double> g(static_cast<std::size_t>(n));
    // Snap to 12 decimals so "0.3:0.7:5" yields the literals 0.4, 0.5, 0.6.
    for (long long k = 0; k < n; ++k) {
        const double x = (static_cast<double>(n - 1 - k) * a + static_cast<double>(k) * b) / static_cast<double>(n - 1);
        g[static_cast<std::size_t>(k)] = std::round(x * 1e12) / 1e12;
    }
    g.back() = b;
    return g;
}

std::vector<Point2> tensor_grid(const std::vector<double>& own, const std::vector<double>& peer) {
    std::vector<Point2> out;
    out.reserve(own.size() * peer.size());
    for (double a : own) {
        for (double b : peer) out.push_back({a, b});
    }
    return out;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const DataError*>(&e)) return 3;
    if (dynamic_cast<const NumericalError*>(&e)) return 4;
    return 1;
}

namespace {

const char* kind_name(int code) {
    switch (code) {
        case 2: return "config";
        case 3: return "data";
        case 4: return "numerical";
        default: return "internal";
    }
}

void error_record(std::ostream& err, int code, const std::string& command, const std::string& message) {
    json rec = {{"status", "error"}, {"kind", kind_name(code)}, {"exit_code", code}, {"command", command},
                {"message", message}};
    err << rec.dump() << '\n';
}

// Options of one subcommand, with typed readers for the resolved-config record.
struct Registry {
    std::vector<std::pair<std::string, std::function<json()>>> fields;

    bool knows(const std::string& key) const {
        return key == "threads" ||
               std::any_of(fields.begin(), fields.end(), [&](const auto& f) { return f.first == key; });
    }
    json resolved() const {
        json j = json::object();
        for (const auto& [name, read] : fields) j[name] = read();
        return j;
    }
};

class Command {
public:
    Command(CLI::App& app, const std::string& name, const std::string& help) : name_(name) {
        sub_ = app.add_subcommand(name, help);
        sub_->add_option("--config", config_path_, "JSON config file; flags override its values");
        sub_->add_option("--threads", threads_, "worker threads (SPILLOVER_THREADS overrides)");
    }
    virtual ~Command() = default;

    const std::string& name() const { return name_; }
    CLI::App* app() const { return sub_; }
    const Registry& registry() const { return reg_; }
    int threads() const { return threads_; }

    virtual void run(std::ostream& out) = 0;

protected:
    template <class T>
    CLI::Option* option(const std::string& key, T& var, const std::string& help) {
        reg_.fields.emplace_back(key, [&var] { return json(var); });
        return sub_->add_option("--" + key, var, help)->capture_default_str();
    }
    CLI::Option* flag(const std::string& key, bool& var, const std::string& help) {
        reg_.fields.emplace_back(key, [&var] { return json(var); });
        return sub_->add_flag("--" + key, var, help);
    }
    CLI::Option* seed_option(bool required) {
        auto* o = option("seed", seed_, "random seed");
        if (required) o->required();
        return o;
    }
    void output_option() { option("out", out_path_, "output path ('-' for standard output)"); }
    void input_option() { option("in", in_path_, "input dataset CSV")->required(); }

    Dataset load() const { return load_dataset_csv(in_path_); }

    // Writes the header block, then lets `body` fill the rest.
    void emit(std::ostream& fallback, const std::vector<std::string>& extra,
              const std::function<void(std::ostream&)>& body) const {
        std::ofstream file;
        std::ostream* os = &fallback;
        if (!out_path_.empty() && out_path_ != "-") {
            file.open(out_path_);
            if (!file) throw ConfigError("cannot write " + out_path_);
            os = &file;
        }
        *os << "# spillover " << name_ << '\n';
        *os << "# config: " << reg_.resolved().dump() << '\n';
        *os << "# seed: " << seed_ << '\n';
        for (const auto& e : extra) *os << "# " << e << '\n';
        body(*os);
        os->flush();
        if (!*os) throw DataError("write failed for " + (out_path_.empty() ? std::string("<stdout>") : out_path_));
    }

    std::string name_;
    CLI::App* sub_ = nullptr;
    Registry reg_;
    std::string config_path_;
    int threads_ = 0;
    std::uint64_t seed_ = 0;
    std::string in_path_;
    std::string out_path_ = "-";
};

std::string fmt(double x) { return format_double(x); }

void check_unit_option(int unit) {
    if (unit != 0 && unit != 1) throw ConfigError("unit must be 0 or 1");
}

// ---- parametric options shared by several subcommands ----

struct ParametricOptions {
    int k1 = 1;
    double eps_bound = kDefaultEpsBound;
    int quad_order = kDefaultMomentOrder;
    bool pool_units = false;
    int unit = 0;

    ParametricConfig config() const {
        check_unit_option(unit);
        if (k1 < 1) throw ConfigError("k1 must be at least 1");
        if (!(eps_bound > 0.0 && eps_bound < 1.0)) throw ConfigError("eps-bound must lie in (0, 1)");
        if (quad_order < 2) throw ConfigError("quad-order must be at least 2");
        ParametricConfig c;
        c.K1 = k1;
        c.eps_bound = eps_bound;
        c.quad_order = quad_order;
        c.pool_units = pool_units;
        c.units = pool_units ? std::vector<int>{0, 1} : std::vector<int>{unit};
        return c;
    }
};

class SimulateCmd : public Command {
public:
    explicit SimulateCmd(CLI::App& app) : Command(app, "simulate", "draw a dataset from the simulation design") {
        option("g", g_, "number of groups");
        seed_option(true);
        rho_opt_ = option("rho", rho_, "latent correlation");
        flag("sutva", sutva_, "spillover-free variant");
        output_option();
    }
    void run(std::ostream& out) override {
        DgpConfig c = sutva_ ? DgpConfig::sutva() : DgpConfig();
        if (g_ < 1) throw ConfigError("g must be at least 1");
        c.G = static_cast<std::size_t>(g_);
        c.seed = seed_;
        if (!sutva_ || rho_opt_->count() > 0) {
            if (!(std::fabs(rho_) < 1.0)) throw ConfigError("rho must lie in (-1, 1)");
            c.sigma_v(0, 1) = c.sigma_v(1, 0) = rho_;
        }
        c.validate();
        const Dataset data = simulate_dataset(c);
        emit(out, {}, [&](std::ostream& os) { write_dataset_csv(os, data); });
    }

private:
    long long g_ = 1000;
    double rho_ = 0.2;
    bool sutva_ = false;
    CLI::Option* rho_opt_ = nullptr;
};

class ParametricCmd : public Command {
public:
    explicit ParametricCmd(CLI::App& app)
        : Command(app, "estimate-parametric", "three-stage parametric estimator on a propensity grid") {
        input_option();
        option("k1", p_.k1, "probit polynomial degree");
        option("eps-bound", p_.eps_bound, "bound on |rho|");
        option("quad-order", p_.quad_order, "quadrature order per dimension");
        flag("pool-units", p_.pool_units, "stack both members in the outcome regressions");
        option("unit", p_.unit, "member whose surfaces are reported");
        option("grid", grid_, "own-propensity grid lo:hi:n");
        option("peer-grid", peer_grid_, "peer-propensity grid (defaults to --grid)");
        output_option();
    }
    void run(std::ostream& out) override {
        const ParametricConfig cfg = p_.config();
        const auto own = parse_grid(grid_);
        const auto peer = parse_grid(peer_grid_.empty() ? grid_ : peer_grid_);
        const Dataset data = load();
        const ParametricFit fit = fit_parametric(data, cfg);
        const int u = p_.unit;
        std::array<EffectSurface, 4> mtr;
        for (int a = 0; a < 4; ++a) mtr[static_cast<std::size_t>(a)] = mtr_surface(fit.mtr, u, a / 2, a % 2);
        const EffectSurface mcse0 = mcse_surface(fit.mtr, u, 0), mcse1 = mcse_surface(fit.mtr, u, 1);
        const EffectSurface mcde0 = mcde_surface(fit.mtr, u, 0), mcde1 = mcde_surface(fit.mtr, u, 1);
        const std::vector<std::string> extra = {
            "rho: " + fmt(fit.copula.rho), "rho_loglik: " + fmt(fit.copula.loglik),
            std::string("rho_boundary_warning: ") + (fit.copula.boundary_warning ? "true" : "false")};
        emit(out, extra, [&](std::ostream& os) {
            os << "p_own,p_peer,mtr00,mtr01,mtr10,mtr11,mcse0,mcse1,mcde0,mcde1\n";
            for (const auto& pt : tensor_grid(own, peer)) {
                os << fmt(pt[0]) << ',' << fmt(pt[1]);
                for (const auto& s : mtr) os << ',' << fmt(s(pt[0], pt[1]));
                os << ',' << fmt(mcse0(pt[0], pt[1])) << ',' << fmt(mcse1(pt[0], pt[1])) << ','
                   << fmt(mcde0(pt[0], pt[1])) << ',' << fmt(mcde1(pt[0], pt[1])) << '\n';
            }
        });
    }

private:
    ParametricOptions p_;
    std::string grid_ = "0.3:0.7:5";
    std::string peer_grid_;
};

Penalty parse_penalty(const std::string& s) {
    if (s == "none") return Penalty::None;
    if (s == "l1") return Penalty::L1Fixed;
    if (s == "l1cv") return Penalty::L1CV;
    throw ConfigError("unknown penalty '" + s + "' (none, l1, l1cv)");
}

class SemiparametricCmd : public Command {
public:
    explicit SemiparametricCmd(CLI::App& app)
        : Command(app, "estimate-semiparametric", "series propensities and local-cubic surfaces on a grid") {
        input_option();
        option("kappa", kappa_, "B-spline functions per continuous column");
        option("penalty", penalty_, "none, l1 or l1cv");
        option("lambda", lambda_, "l1 penalty level for --penalty l1");
        option("delta", delta_, "propensity trimming level");
        option("folds", folds_, "cross-validation folds");
        option("h1", h1_, "bandwidth for the D0*D1 cross-partial");
        option("h2", h2_, "bandwidth for the outcome cross-partial");
        option("h-beta", h_beta_, "bandwidth for the partial-linear step");
        option("kernel", kernel_, "epanechnikov, gaussian or uniform");
        flag("cv-bandwidth", cv_bandwidth_, "choose h1 and h2 by cross-validation");
        option("h-grid", h_grid_, "bandwidth grid lo:hi:n for cross-validation");
        option("unit", unit_, "member whose surfaces are reported");
        option("grid", grid_, "own-propensity grid lo:hi:n");
        option("peer-grid", peer_grid_, "peer-propensity grid (defaults to --grid)");
        seed_opt_ = seed_option(false);
        output_option();
    }
    void run(std::ostream& out) override {
        check_unit_option(unit_);
        SemiparamConfig cfg;
        cfg.series.kappa = kappa_;
        cfg.series.penalty = parse_penalty(penalty_);
        cfg.series.lambda = lambda_;
        cfg.series.trim_delta = delta_;
        cfg.series.folds = folds_;
        cfg.series.seed = seed_;
        cfg.h1 = h1_;
        cfg.h2 = h2_;
        cfg.h_beta = h_beta_;
        cfg.kernel = parse_kernel(kernel_);
        cfg.cv_bandwidth = cv_bandwidth_;
        cfg.h_grid = parse_grid(h_grid_);
        cfg.unit = unit_;
        const bool stochastic = cfg.cv_bandwidth || cfg.series.penalty == Penalty::L1CV;
        if (stochastic && seed_opt_->count() == 0) throw ConfigError("--seed is required with cross-validation");
        const auto own = parse_grid(grid_);
        const auto peer = parse_grid(peer_grid_.empty() ? grid_ : peer_grid_);

        const Dataset data = load();
        const SemiparamFit fit = fit_semiparametric(data, cfg);
        std::array<EffectSurface, 4> mtr;
        for (int a = 0; a < 4; ++a) {
            mtr[static_cast<std::size_t>(a)] = semiparam_surface(data, fit, EffectKind::MTR, a / 2, a % 2);
        }
        const std::vector<std::string> extra = {"h1: " + fmt(fit.h1), "h2: " + fmt(fit.h2)};
        emit(out, extra, [&](std::ostream& os) {
            os << "p_own,p_peer,mtr00,mtr01,mtr10,mtr11,mcse0,mcse1,mcde0,mcde1,se00,se01,se10,se11,error\n";
            for (const auto& pt : tensor_grid(own, peer)) {
                std::array<double, 4> m{}, se{};
                std::string errors;
                for (std::size_t a = 0; a < 4; ++a) {
                    try {
                        m[a] = mtr[a](pt[0], pt[1]);
                        se[a] = std::sqrt(semiparam_point_variance(data, fit, static_cast<int>(a) / 2,
                                                                   static_cast<int>(a) % 2, pt)
                                              .variance);
                    } catch (const Error& e) {
                        m[a] = se[a] = std::numeric_limits<double>::quiet_NaN();
                        if (!errors.empty()) errors += "; ";
                        errors += e.what();
                    }
                }
                // Arms in arm_index order: 00, 01, 10, 11.
                const double mcse0 = m[1] - m[0], mcse1 = m[3] - m[2];
                const double mcde0 = m[2] - m[0], mcde1 = m[3] - m[1];
                os << fmt(pt[0]) << ',' << fmt(pt[1]);
                for (double v : m) os << ',' << fmt(v);
                os << ',' << fmt(mcse0) << ',' << fmt(mcse1) << ',' << fmt(mcde0) << ',' << fmt(mcde1);
                for (double v : se) os << ',' << fmt(v);
                std::replace(errors.begin(), errors.end(), ',', ' ');
                os << ',' << errors << '\n';
            }
        });
    }

private:
    int kappa_ = 8;
    std::string penalty_ = "none";
    double lambda_ = 0.0;
    double delta_ = 1e-3;
    int folds_ = 5;
    double h1_ = 0.25;
    double h2_ = 0.2;
    double h_beta_ = 0.2;
    std::string kernel_ = "epanechnikov";
    bool cv_bandwidth_ = false;
    std::string h_grid_ = "0.15:0.4:6";
    int unit_ = 0;
    std::string grid_ = "0.3:0.7:5";
    std::string peer_grid_;
    CLI::Option* seed_opt_ = nullptr;
};

std::vector<double> parse_levels(const std::string& s) {
    std::vector<double> out;
    for (const auto& part : split(s, ',')) {
        double v = 0.0;
        if (!parse_number(part, v) || !(v > 0.0 && v < 1.0)) throw ConfigError("bad confidence level '" + part + "'");
        out.push_back(v);
    }
    return out;
}

class BootstrapCmd : public Command {
public:
    explicit BootstrapCmd(CLI::App& app) : Command(app, "bootstrap", "group bootstrap percentile intervals") {
        input_option();
        option("boot", boot_, "bootstrap replications B");
        option("levels", levels_, "comma-separated confidence levels");
        option("grid", grid_, "target grid lo:hi:n (empty: the five standard points)");
        option("k1", p_.k1, "probit polynomial degree");
        option("eps-bound", p_.eps_bound, "bound on |rho|");
        option("quad-order", p_.quad_order, "quadrature order per dimension");
        flag("pool-units", p_.pool_units, "stack both members in the outcome regressions");
        option("unit", p_.unit, "member whose effects are targeted");
        seed_option(true);
        output_option();
    }
    void run(std::ostream& out) override {
        const ParametricConfig cfg = p_.config();
        if (boot_ < 2) throw ConfigError("boot must be at least 2");
        const auto levels = parse_levels(levels_);
        std::vector<Target> targets;
        if (grid_.empty()) {
            targets = table1_targets(p_.unit);
        } else {
            const auto g = parse_grid(grid_);
            for (TargetKind kind : {TargetKind::MCDE, TargetKind::MCSE}) {
                for (int d : {1, 0}) {
                    for (const auto& pt : tensor_grid(g, g)) {
                        targets.push_back({kind, d, p_.unit, EvalPoint{pt[0], pt[1], {}}});
                    }
                }
            }
            targets.push_back({TargetKind::Rho, 0, p_.unit, {}});
        }
        const Dataset data = load();
        const BootstrapResult res = bootstrap(data, cfg, targets, boot_, levels, seed_);
        std::vector<std::string> extra = {"failures: " + std::to_string(res.failures),
                                          std::string("flagged: ") + (res.flagged ? "true" : "false")};
        if (!res.first_failure.empty()) extra.push_back("first_failure: " + res.first_failure);
        emit(out, extra, [&](std::ostream& os) {
            os << "target,estimate";
            for (double l : levels) os << ",lower_" << fmt(l) << ",upper_" << fmt(l);
            os << '\n';
            for (const auto& t : res.targets) {
                os << t.target.label() << ',' << fmt(t.estimate);
                for (double l : levels) {
                    const auto& iv = t.interval(l);
                    os << ',' << fmt(iv.lower) << ',' << fmt(iv.upper);
                }
                os << '\n';
            }
        });
    }

private:
    ParametricOptions p_;
    int boot_ = 200;
    std::string levels_ = "0.9,0.95";
    std::string grid_;
};

class CoverageCmd : public Command {
public:
    explicit CoverageCmd(CLI::App& app) : Command(app, "coverage", "Monte Carlo coverage of bootstrap intervals") {
        option("g", g_, "groups per replication");
        option("reps", reps_, "outer replications R");
        option("boot", boot_, "bootstrap replications B");
        option("level", level_, "confidence level");
        option("k1", p_.k1, "probit polynomial degree");
        option("eps-bound", p_.eps_bound, "bound on |rho|");
        option("quad-order", p_.quad_order, "quadrature order per dimension");
        seed_option(true);
        output_option();
    }
    void run(std::ostream& out) override {
        const ParametricConfig cfg = p_.config();
        if (g_ < 10) throw ConfigError("g must be at least 10");
        if (reps_ < 1 || boot_ < 2) throw ConfigError("reps must be >= 1 and boot >= 2");
        if (!(level_ > 0.0 && level_ < 1.0)) throw ConfigError("level must lie in (0, 1)");
        DgpConfig dgp;
        dgp.G = static_cast<std::size_t>(g_);
        CoverageOptions opts;
        opts.R = reps_;
        opts.B = boot_;
        opts.level = level_;
        const CoverageTable table = coverage_experiment(dgp, opts, seed_, cfg);
        const std::vector<std::string> extra = {"failed_replications: " + std::to_string(table.failed_replications),
                                                "flagged_bootstraps: " + std::to_string(table.flagged_bootstraps)};
        emit(out, extra, [&](std::ostream& os) { write_coverage_csv(os, table); });
    }

private:
    ParametricOptions p_;
    long long g_ = 1000;
    int reps_ = 500;
    int boot_ = 200;
    double level_ = 0.95;
};

std::array<double, 4> parse_rectangle(const std::string& s) {
    const auto parts = split(s, ':');
    std::array<double, 4> r{};
    if (parts.size() != 4) throw ConfigError("bad rectangle '" + s + "': expected p0:p0':p1:p1'");
    for (std::size_t k = 0; k < 4; ++k) {
        if (!parse_number(parts[k], r[k]) || !(r[k] > 0.0 && r[k] < 1.0)) {
            throw ConfigError("bad rectangle '" + s + "': coordinates must lie in (0, 1)");
        }
    }
    return r;
}

class LocalEffectsCmd : public Command {
public:
    explicit LocalEffectsCmd(CLI::App& app)
        : Command(app, "local-effects", "average, complier and local average effects") {
        input_option();
        option("k1", p_.k1, "probit polynomial degree");
        option("eps-bound", p_.eps_bound, "bound on |rho|");
        option("quad-order", p_.quad_order, "quadrature order per dimension");
        flag("pool-units", p_.pool_units, "stack both members in the outcome regressions");
        option("unit", p_.unit, "member whose effects are reported");
        option("bound-own", bound_own_, "own complier bound");
        option("bound-peer", bound_peer_, "peer complier bound");
        option("rect", rect_, "propensity rectangle p0:p0':p1:p1'");
        option("moments", moments_, "model or kernel");
        option("bandwidth", h_, "bandwidth for kernel moments");
        option("kernel", kernel_, "epanechnikov, gaussian or uniform");
        output_option();
    }
    void run(std::ostream& out) override {
        const ParametricConfig cfg = p_.config();
        const auto r = parse_rectangle(rect_);
        if (moments_ != "model" && moments_ != "kernel") throw ConfigError("moments must be 'model' or 'kernel'");
        const KernelType kernel = parse_kernel(kernel_);
        const Dataset data = load();
        const ParametricFit fit = fit_parametric(data, cfg);
        const int u = p_.unit;
        const int order = p_.quad_order;

        std::vector<std::pair<std::string, double>> rows;
        for (int d : {1, 0}) rows.emplace_back("acse" + std::to_string(d), acse_acde(mcse_surface(fit.mtr, u, d), fit.copula, order));
        for (int d : {1, 0}) rows.emplace_back("acde" + std::to_string(d), acse_acde(mcde_surface(fit.mtr, u, d), fit.copula, order));
        const ComplierEffects ce = complier_effects(mcse_surface(fit.mtr, u, 0), mcde_surface(fit.mtr, u, 0),
                                                    fit.copula, bound_own_, bound_peer_, order);
        rows.emplace_back("complier_spillover", ce.spillover);
        rows.emplace_back("complier_direct", ce.direct);
        rows.emplace_back("share_peer_complier", ce.shares[0]);
        rows.emplace_back("share_own_complier", ce.shares[1]);

        std::array<EffectSurface, 4> mtr;
        for (int a = 0; a < 4; ++a) mtr[static_cast<std::size_t>(a)] = mtr_surface(fit.mtr, u, a / 2, a % 2);
        const MtrFunction m = [&mtr](int d, int dp, double vo, double vp) {
            return mtr[static_cast<std::size_t>(arm_index(d, dp))](vo, vp);
        };
        MomentQuad quad;
        quad.provenance = moments_ == "model" ? "model-implied" : "kernel-estimated";
        for (double p0 : {r[0], r[1]}) {
            for (double p1 : {r[2], r[3]}) {
                quad.points.push_back(moments_ == "model" ? model_implied_moments(fit.copula, m, p0, p1, order)
                                                          : kernel_moments(data, fit.props, u, p0, p1, h_, kernel));
            }
        }
        for (int d : {1, 0}) rows.emplace_back("lacse_rect" + std::to_string(d), lacse_rectangle(d, quad));
        for (int d : {1, 0}) rows.emplace_back("lacde_rect" + std::to_string(d), lacde_rectangle(d, quad));
        for (int d : {1, 0}) {
            rows.emplace_back("lacse_fixed_own" + std::to_string(d),
                              lacse_fixed_own(d, quad.at(r[0], r[2]), quad.at(r[0], r[3])));
        }
        for (int d : {1, 0}) {
            rows.emplace_back("lacde_fixed_peer" + std::to_string(d),
                              lacde_fixed_peer(d, quad.at(r[0], r[2]), quad.at(r[1], r[2])));
        }
        emit(out, {"rho: " + fmt(fit.copula.rho), "moments: " + quad.provenance}, [&](std::ostream& os) {
            os << "quantity,value\n";
            for (const auto& [k, v] : rows) os << k << ',' << fmt(v) << '\n';
        });
    }

private:
    ParametricOptions p_;
    double bound_own_ = 0.5;
    double bound_peer_ = 0.5;
    std::string rect_ = "0.3:0.5:0.3:0.5";
    std::string moments_ = "model";
    double h_ = 0.25;
    std::string kernel_ = "epanechnikov";
};

class PrteCmd : public Command {
public:
    explicit PrteCmd(CLI::App& app) : Command(app, "prte", "policy-relevant treatment effect") {
        input_option();
        option("k1", p_.k1, "probit polynomial degree");
        option("eps-bound", p_.eps_bound, "bound on |rho|");
        flag("pool-units", p_.pool_units, "stack both members in the outcome regressions");
        option("unit", p_.unit, "member whose outcome is targeted");
        option("policy", policy_, "absolute, proportional or instrument");
        option("eps", eps_, "policy size");
        option("column", column_, "group-input column shifted by an instrument policy");
        option("order", order_, "quadrature nodes per dimension (multiple of 8)");
        output_option();
    }
    void run(std::ostream& out) override {
        const ParametricConfig cfg = p_.config();
        PolicySpec policy;
        if (policy_ == "absolute") {
            policy = PolicySpec::absolute(eps_);
        } else if (policy_ == "proportional") {
            policy = PolicySpec::proportional(eps_);
        } else if (policy_ == "instrument") {
            policy = PolicySpec::instrument(column_, eps_);
        } else {
            throw ConfigError("unknown policy '" + policy_ + "' (absolute, proportional, instrument)");
        }
        const Dataset data = load();
        const ParametricFit fit = fit_parametric(data, cfg);
        const int u = p_.unit;
        EffectSurfaces s;
        for (int d = 0; d < 2; ++d) {
            s.mcse[static_cast<std::size_t>(d)] = mcse_surface(fit.mtr, u, d);
            s.mcde[static_cast<std::size_t>(d)] = mcde_surface(fit.mtr, u, d);
        }
        const PrteResult res = prte(policy, s, fit.copula, fit.props, &data, &fit.probit0, &fit.probit1, u, order_);
        emit(out, {"rho: " + fmt(fit.copula.rho)}, [&](std::ostream& os) {
            os << "quantity,value\n";
            os << "delta_ey," << fmt(res.delta_ey) << '\n';
            os << "delta_p," << fmt(res.delta_p) << '\n';
            os << "prte," << fmt(res.prte) << '\n';
            const char* names[] = {"stratum_up_up", "stratum_up_down", "stratum_down_up", "stratum_down_down"};
            for (std::size_t k = 0; k < 4; ++k) os << names[k] << ',' << fmt(res.strata[k]) << '\n';
        });
    }

private:
    ParametricOptions p_;
    std::string policy_ = "absolute";
    double eps_ = 0.1;
    int column_ = 0;
    int order_ = kDefaultPrteOrder;
};

OutcomeSet parse_outcome_set(const std::string& s) {
    const auto parts = split(s, ':');
    OutcomeSet o;
    if (parts.size() != 2 || !parse_number(parts[0], o.lo) || !parse_number(parts[1], o.hi)) {
        throw ConfigError("bad outcome set '" + s + "': expected lo:hi");
    }
    return o;
}

class DiagnosticsCmd : public Command {
public:
    explicit DiagnosticsCmd(CLI::App& app) : Command(app, "diagnostics", "falsification checks") {
        input_option();
        option("check", check_, "nesting, index or both");
        option("k1", k1_, "probit polynomial degree");
        option("unit", unit_, "member whose outcome is examined");
        option("a1", a1_, "own outcome set lo:hi (default: interquartile range)");
        option("a2", a2_, "peer outcome set lo:hi (default: interquartile range)");
        option("bandwidth", nest_.h, "bandwidth for the nesting check");
        option("kernel", kernel_, "epanechnikov, gaussian or uniform");
        option("tau", nest_.tau_multiplier, "violation threshold in standard errors");
        option("grid", grid_, "propensity grid lo:hi:n for the nesting check");
        option("cell-width", index_.cell_width, "propensity cell width for the index check");
        option("split-column", index_.split_column, "group-input column split at its cell median");
        option("min-per-side", min_per_side_, "groups required on each side of the split");
        option("threshold", index_.threshold, "index check threshold on the standardized difference");
        output_option();
    }
    void run(std::ostream& out) override {
        check_unit_option(unit_);
        if (check_ != "nesting" && check_ != "index" && check_ != "both") {
            throw ConfigError("check must be nesting, index or both");
        }
        if (k1_ < 1) throw ConfigError("k1 must be at least 1");
        if (min_per_side_ < 1) throw ConfigError("min-per-side must be at least 1");
        nest_.kernel = parse_kernel(kernel_);
        nest_.unit = index_.unit = unit_;
        index_.min_per_side = static_cast<std::size_t>(min_per_side_);
        const auto g = parse_grid(grid_);
        const Dataset data = load();
        const ProbitModel m0 = fit_probit(data, 0, k1_), m1 = fit_probit(data, 1, k1_);
        const auto props = predict_pairs(m0, m1, data);
        OutcomeSets sets = default_outcome_sets(data, unit_);
        if (!a1_.empty()) sets.a1 = parse_outcome_set(a1_);
        if (!a2_.empty()) sets.a2 = parse_outcome_set(a2_);

        std::vector<DiagnosticReport> reports;
        if (check_ != "index") reports.push_back(nesting_inequality_report(data, props, sets, tensor_grid(g, g), nest_));
        if (check_ != "nesting") reports.push_back(index_sufficiency_report(data, props, sets, index_));

        std::vector<std::string> extra = {"a1: " + fmt(sets.a1.lo) + ":" + fmt(sets.a1.hi),
                                          "a2: " + fmt(sets.a2.lo) + ":" + fmt(sets.a2.hi)};
        for (const auto& r : reports) {
            extra.push_back(r.check + ": evaluated " + std::to_string(r.evaluated) + ", violations " +
                            std::to_string(r.violations) + ", fraction " + fmt(r.violation_fraction) +
                            ", worst " + fmt(r.worst_magnitude));
        }
        emit(out, extra, [&](std::ostream& os) {
            os << "check,arm,p_own,p_peer,statistic,se,violation,ok,error\n";
            for (const auto& r : reports) {
                for (const auto& e : r.entries) {
                    std::string msg = e.error;
                    std::replace(msg.begin(), msg.end(), ',', ' ');
                    os << r.check << ',' << e.label << ',' << fmt(e.point[0]) << ',' << fmt(e.point[1]) << ','
                       << fmt(e.statistic) << ',' << fmt(e.se) << ',' << (e.violation ? 1 : 0) << ','
                       << (e.ok ? 1 : 0) << ',' << msg << '\n';
                }
            }
        });
    }

private:
    std::string check_ = "both";
    int k1_ = 1;
    int unit_ = 0;
    std::string a1_, a2_;
    std::string kernel_ = "epanechnikov";
    std::string grid_ = "0.3:0.7:3";
    NestingOptions nest_;
    IndexSufficiencyOptions index_;
    int min_per_side_ = 20;
};

class NaiveMteCmd : public Command {
public:
    explicit NaiveMteCmd(CLI::App& app) : Command(app, "naive-mte", "single-agent MTE comparator ignoring peers") {
        input_option();
        option("bandwidth", bandwidth_, "local quadratic bandwidth");
        option("unit", unit_, "member whose MTE is estimated");
        option("grid", grid_, "own-propensity grid lo:hi:n");
        output_option();
    }
    void run(std::ostream& out) override {
        check_unit_option(unit_);
        if (!(bandwidth_ > 0.0)) throw ConfigError("bandwidth must be positive");
        const auto g = parse_grid(grid_);
        const Dataset data = load();
        const NaiveMteModel model = fit_naive_mte(data, unit_, bandwidth_);
        emit(out, {}, [&](std::ostream& os) {
            os << "p_own,naive_mte\n";
            for (double p : g) os << fmt(p) << ',' << fmt(evaluate_naive_mte(model, p)) << '\n';
        });
    }

private:
    double bandwidth_ = 0.3;
    int unit_ = 0;
    std::string grid_ = "0.1:0.9:9";
};

// Config values become flag tokens placed ahead of the user's own flags, so
// with last-one-wins parsing the command line takes precedence.
std::vector<std::string> config_tokens(const std::string& path, const Command& cmd) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config " + path + " must hold a JSON object");
    const bool sectioned = j.contains(cmd.name()) && j[cmd.name()].is_object();
    const json& body = sectioned ? j[cmd.name()] : j;
    static const std::vector<std::string> commands = {"simulate", "estimate-parametric", "estimate-semiparametric",
                                                      "bootstrap", "coverage", "local-effects", "prte",
                                                      "diagnostics", "naive-mte"};
    std::vector<std::string> tokens;
    for (const auto& [key, value] : body.items()) {
        if (!sectioned && value.is_object() &&
            std::find(commands.begin(), commands.end(), key) != commands.end()) {
            continue;
        }
        if (!cmd.registry().knows(key)) throw ConfigError("unknown config key '" + key + "' for " + cmd.name());
        const std::string flag = "--" + key;
        if (value.is_boolean()) {
            tokens.push_back(flag + "=" + (value.get<bool>() ? "true" : "false"));
        } else if (value.is_string()) {
            tokens.push_back(flag);
            tokens.push_back(value.get<std::string>());
        } else if (value.is_number()) {
            tokens.push_back(flag);
            tokens.push_back(value.dump());
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& v : value) {
                if (!joined.empty()) joined += ",";
                joined += v.is_string() ? v.get<std::string>() : v.dump();
            }
            tokens.push_back(flag);
            tokens.push_back(joined);
        } else {
            throw ConfigError("config key '" + key + "' has an unsupported type");
        }
    }
    return tokens;
}

std::string find_config_path(const std::vector<std::string>& args) {
    for (std::size_t k = 1; k < args.size(); ++k) {
        if (args[k] == "--config" && k + 1 < args.size()) return args[k + 1];
        if (args[k].rfind("--config=", 0) == 0) return args[k].substr(9);
    }
    return {};
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Estimation and simulation for two-member treatment spillovers", "spillover"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::vector<std::unique_ptr<Command>> cmds;
    cmds.push_back(std::make_unique<SimulateCmd>(app));
    cmds.push_back(std::make_unique<ParametricCmd>(app));
    cmds.push_back(std::make_unique<SemiparametricCmd>(app));
    cmds.push_back(std::make_unique<BootstrapCmd>(app));
    cmds.push_back(std::make_unique<CoverageCmd>(app));
    cmds.push_back(std::make_unique<LocalEffectsCmd>(app));
    cmds.push_back(std::make_unique<PrteCmd>(app));
    cmds.push_back(std::make_unique<DiagnosticsCmd>(app));
    cmds.push_back(std::make_unique<NaiveMteCmd>(app));

    const std::string command = args.empty() ? std::string() : args[0];
    try {
        std::vector<std::string> tokens = args;
        if (!args.empty()) {
            const auto it = std::find_if(cmds.begin(), cmds.end(), [&](const auto& c) { return c->name() == args[0]; });
            if (it == cmds.end() && args[0].rfind("-", 0) != 0) {
                error_record(err, 2, command, "unknown subcommand '" + args[0] + "'");
                return 2;
            }
            const std::string path = find_config_path(args);
            if (it != cmds.end() && !path.empty()) {
                const auto extra = config_tokens(path, **it);
                tokens.insert(tokens.begin() + 1, extra.begin(), extra.end());
            }
        }
        std::reverse(tokens.begin(), tokens.end());
        try {
            app.parse(tokens);
        } catch (const CLI::CallForHelp& e) {
            out << app.help();
            return 0;
        } catch (const CLI::CallForAllHelp& e) {
            out << app.help("", CLI::AppFormatMode::All);
            return 0;
        } catch (const CLI::ParseError& e) {
            error_record(err, 2, command, e.what());
            return 2;
        }
        for (auto& c : cmds) {
            if (!c->app()->parsed()) continue;
            set_threads(resolve_threads(c->threads()));
            c->run(out);
            return 0;
        }
        error_record(err, 2, command, "no subcommand given");
        return 2;
    } catch (const std::exception& e) {
        const int code = exit_code_for(e);
        error_record(err, code, command, e.what());
        return code;
    }
}

int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
    return run_command(args, out, err);
}

}  // namespace spillover
