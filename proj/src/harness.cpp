#include "kinetic/harness.hpp"

#include <json.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace kinetic {

namespace pt = boost::property_tree;
using json = nlohmann::json;

// ---------------------------------------------------------------------------------------------
// Configuration

double RunConfig::alpha_for(double eps) const {
    switch (alpha_rule) {
        case AlphaRule::fixed: return alpha;
        case AlphaRule::proportional: return std::sqrt(2.0 * M_PI) * lambda * eps;
        case AlphaRule::zero: return 0.0;
    }
    return alpha;
}

Regime RunConfig::regime() const {
    switch (alpha_rule) {
        case AlphaRule::fixed: return Regime::dirichlet;
        case AlphaRule::proportional: return Regime::navier;
        case AlphaRule::zero: return Regime::perfect_slip;
    }
    return Regime::dirichlet;
}

namespace {

std::string rule_name(AlphaRule r) {
    switch (r) {
        case AlphaRule::fixed: return "fixed";
        case AlphaRule::proportional: return "proportional";
        case AlphaRule::zero: return "zero";
    }
    return "?";
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s;
}

template <class T>
T read(const pt::ptree& t, const std::string& key, const T& fallback) {
    auto node = t.get_child_optional(pt::ptree::path_type(key, '.'));
    if (!node) return fallback;
    std::istringstream is(node->data());
    T v{};
    is >> v;
    std::string rest;
    is >> rest;
    if (is.bad() || (is.fail() && !is.eof()) || !rest.empty())
        throw ConfigError("bad value for " + key + ": '" + node->data() + "'");
    return v;
}

template <>
std::string read(const pt::ptree& t, const std::string& key, const std::string& fallback) {
    auto node = t.get_child_optional(pt::ptree::path_type(key, '.'));
    if (!node) return fallback;
    std::string s = node->data();
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    return s;
}

std::vector<double> parse_list(const std::string& key, const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("bad list entry for " + key + ": '" + item + "'");
        }
    }
    return v;
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> k = {
        "grid.n_per_axis",     "grid.v_max",          "collision.n_theta",  "collision.n_phi",
        "channel.H",           "channel.n_cells",     "channel.phi2",       "channel.theta_minus",
        "channel.theta_plus",  "sweep.eps",           "sweep.alpha_rule",   "sweep.alpha",
        "sweep.lambda",        "solver.tol_picard",   "solver.k_max",       "solver.dt",
        "solver.cfl",          "solver.steps",        "solver.checkpoint_every", "solver.restart",
        "solver.amplitude",    "solver.seed",         "diagnostics.lambda", "census.domain",
        "census.size",         "census.eps",          "census.T0",          "census.eta",
        "census.v_cap",        "census.samples",      "census.seed",        "run.workers",
        "run.out"};
    return k;
}

}  // namespace

RunConfig parse_config(const std::string& ini_text, const std::vector<std::string>& overrides) {
    pt::ptree t;
    try {
        std::istringstream is(ini_text);
        pt::ini_parser::read_ini(is, t);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }
    for (const std::string& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override must be section.key=value: '" + o + "'");
        const std::string key = o.substr(0, eq);
        if (!known_keys().count(key)) throw ConfigError("unknown setting '" + key + "'");
        t.put(pt::ptree::path_type(key, '.'), o.substr(eq + 1));
    }
    for (const auto& sec : t) {
        if (sec.second.empty() && !sec.second.data().empty()) throw ConfigError("setting outside a section: " + sec.first);
        for (const auto& kv : sec.second)
            if (!known_keys().count(sec.first + "." + kv.first))
                throw ConfigError("unknown setting '" + sec.first + "." + kv.first + "'");
    }

    RunConfig c;
    c.n_per_axis = read(t, "grid.n_per_axis", c.n_per_axis);
    c.v_max = read(t, "grid.v_max", c.v_max);
    c.n_theta = read(t, "collision.n_theta", c.n_theta);
    c.n_phi = read(t, "collision.n_phi", c.n_phi);
    c.H = read(t, "channel.H", c.H);
    c.n_cells = read(t, "channel.n_cells", c.n_cells);
    c.phi2 = read(t, "channel.phi2", c.phi2);
    c.theta_minus = read(t, "channel.theta_minus", c.theta_minus);
    c.theta_plus = read(t, "channel.theta_plus", c.theta_plus);
    const std::string eps = read<std::string>(t, "sweep.eps", "");
    if (!eps.empty()) c.eps_list = parse_list("sweep.eps", eps);
    const std::string rule = read<std::string>(t, "sweep.alpha_rule", "fixed");
    if (rule == "fixed") c.alpha_rule = AlphaRule::fixed;
    else if (rule == "proportional") c.alpha_rule = AlphaRule::proportional;
    else if (rule == "zero") c.alpha_rule = AlphaRule::zero;
    else throw ConfigError("sweep.alpha_rule must be fixed, proportional or zero");
    c.alpha = read(t, "sweep.alpha", c.alpha);
    c.lambda = read(t, "sweep.lambda", c.lambda);
    c.tol_picard = read(t, "solver.tol_picard", c.tol_picard);
    c.k_max = read(t, "solver.k_max", c.k_max);
    c.dt = read(t, "solver.dt", c.dt);
    c.cfl = read(t, "solver.cfl", c.cfl);
    c.steps = read(t, "solver.steps", c.steps);
    c.checkpoint_every = read(t, "solver.checkpoint_every", c.checkpoint_every);
    c.restart = read<std::string>(t, "solver.restart", c.restart);
    c.amplitude = read(t, "solver.amplitude", c.amplitude);
    c.seed = read(t, "solver.seed", c.seed);
    c.energy_lambda = read(t, "diagnostics.lambda", c.energy_lambda);
    c.census_domain = read<std::string>(t, "census.domain", c.census_domain);
    c.census_size = read(t, "census.size", c.census_size);
    c.census_eps = read(t, "census.eps", c.census_eps);
    c.census_T0 = read(t, "census.T0", c.census_T0);
    c.census_eta = read(t, "census.eta", c.census_eta);
    c.census_v_cap = read(t, "census.v_cap", c.census_v_cap);
    c.census_samples = read(t, "census.samples", c.census_samples);
    c.census_seed = read(t, "census.seed", c.census_seed);
    c.workers = read(t, "run.workers", c.workers);
    c.out_dir = read<std::string>(t, "run.out", c.out_dir);
    validate(c);
    return c;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), overrides);
}

void validate(const RunConfig& c) {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    need(c.n_per_axis >= 8 && c.n_per_axis % 2 == 0, "grid.n_per_axis must be even and >= 8");
    need(c.v_max > 0.0, "grid.v_max must be positive");
    need(c.n_theta >= 1 && c.n_phi >= 2 && c.n_phi % 2 == 0, "collision sphere rule needs n_theta >= 1, even n_phi");
    need(c.H > 0.0, "channel.H must be positive");
    need(c.n_cells >= 16, "channel.n_cells must be >= 16");
    need(!c.eps_list.empty(), "sweep.eps must list at least one value");
    for (std::size_t i = 0; i < c.eps_list.size(); ++i) {
        need(c.eps_list[i] > 0.0, "sweep.eps values must be positive");
        if (i) need(c.eps_list[i] < c.eps_list[i - 1], "sweep.eps must be strictly decreasing");
        const double a = c.alpha_for(c.eps_list[i]);
        need(a >= 0.0 && a <= 1.0, "accommodation coefficient " + fmt(a) + " outside [0,1] at eps " +
                                       fmt(c.eps_list[i]));
    }
    need(c.lambda >= 0.0, "sweep.lambda must be nonnegative");
    need(c.tol_picard > 0.0 && c.k_max >= 1, "solver tolerances must be positive");
    need(c.dt >= 0.0 && c.cfl > 0.0 && c.steps >= 0 && c.checkpoint_every >= 0, "bad time-stepping settings");
    need(c.census_domain == "disk" || c.census_domain == "slab", "census.domain must be disk or slab");
    need(c.census_eps > 0.0 && c.census_T0 > 0.0 && c.census_eta > 0.0 && c.census_v_cap > c.census_eta &&
             c.census_samples > 0 && c.census_size > 0.0,
         "bad census settings");
    need(c.workers >= 1, "run.workers must be >= 1");
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
    return {{"grid.n_per_axis", std::to_string(c.n_per_axis)},
            {"grid.v_max", fmt(c.v_max)},
            {"collision.n_theta", std::to_string(c.n_theta)},
            {"collision.n_phi", std::to_string(c.n_phi)},
            {"channel.H", fmt(c.H)},
            {"channel.n_cells", std::to_string(c.n_cells)},
            {"channel.phi2", fmt(c.phi2)},
            {"channel.theta_minus", fmt(c.theta_minus)},
            {"channel.theta_plus", fmt(c.theta_plus)},
            {"sweep.eps", join(c.eps_list)},
            {"sweep.alpha_rule", rule_name(c.alpha_rule)},
            {"sweep.alpha", fmt(c.alpha)},
            {"sweep.lambda", fmt(c.lambda)},
            {"solver.tol_picard", fmt(c.tol_picard)},
            {"solver.k_max", std::to_string(c.k_max)},
            {"solver.dt", fmt(c.dt)},
            {"solver.cfl", fmt(c.cfl)},
            {"solver.steps", std::to_string(c.steps)},
            {"solver.checkpoint_every", std::to_string(c.checkpoint_every)},
            {"solver.restart", c.restart},
            {"solver.amplitude", fmt(c.amplitude)},
            {"solver.seed", std::to_string(c.seed)},
            {"diagnostics.lambda", fmt(c.energy_lambda)},
            {"census.domain", c.census_domain},
            {"census.size", fmt(c.census_size)},
            {"census.eps", fmt(c.census_eps)},
            {"census.T0", fmt(c.census_T0)},
            {"census.eta", fmt(c.census_eta)},
            {"census.v_cap", fmt(c.census_v_cap)},
            {"census.samples", std::to_string(c.census_samples)},
            {"census.seed", std::to_string(c.census_seed)}};
}

// ---------------------------------------------------------------------------------------------
// Workspace and observables

std::unique_ptr<Workspace> make_workspace(const RunConfig& c, bool with_coefficients) {
    auto ws = std::make_unique<Workspace>();
    ws->grid = build_grid(c.n_per_axis, c.v_max);
    CollisionOptions o;
    o.n_theta = c.n_theta;
    o.n_phi = c.n_phi;
    ws->kernel = std::make_unique<CollisionKernel>(ws->grid, o);
    ws->mats = build_matrices(*ws->kernel);
    if (with_coefficients) ws->coeffs = transport_coefficients(ws->mats, ws->grid);
    ws->ctx = std::make_unique<VelocityContext>(ws->grid, *ws->kernel, ws->mats);
    return ws;
}

ChannelData channel_data(const RunConfig& c, double eps) {
    ChannelData d;
    d.eps = eps;
    d.alpha = c.alpha_for(eps);
    d.phi2 = c.phi2;
    d.theta_minus = c.theta_minus;
    d.theta_plus = c.theta_plus;
    return d;
}

BoundaryObservables extract_boundary_observables(const MacroFields& m, double sigma, double kappa, double lambda,
                                                 double theta_minus, double theta_plus) {
    BoundaryObservables o;
    const std::size_t n = m.size();
    if (n < 3) return o;
    for (int side = 0; side < 2; ++side) {
        auto at = [&](std::size_t k) { return side == 0 ? k : n - 1 - k; };
        auto value = [&](auto q) { return 1.875 * q(at(0)) - 1.25 * q(at(1)) + 0.375 * q(at(2)); };
        auto dn = [&](auto q) { return -(-2.0 * q(at(0)) + 3.0 * q(at(1)) - q(at(2))) / m.dx; };
        auto b2 = [&](std::size_t k) { return m.b[k][1]; };
        auto c = [&](std::size_t k) { return m.c[k]; };
        const double tw = side == 0 ? theta_minus : theta_plus;
        const double bw = value(b2), cw = value(c);
        o.b2_wall = std::max(o.b2_wall, std::abs(bw));
        o.c_jump = std::max(o.c_jump, std::abs(cw - tw));
        o.slip_defect = std::max(o.slip_defect, std::abs(sigma * dn(b2) + lambda * bw));
        o.robin_defect = std::max(o.robin_defect, std::abs(kappa * dn(c) + 0.8 * lambda * (cw - tw)));
    }
    return o;
}

MacroFields cell_macro(const MacroProjector& proj, const DistributionField& f) {
    DistributionField cells(static_cast<int>(f.values.rows()), f.mesh, Layout::cell_average, f.mode);
    cells.values = f.cell_averages();
    return extract_macro(proj, cells);
}

double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = std::min(x.size(), y.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::log(x[i]), b = std::log(std::max(y[i], std::numeric_limits<double>::min()));
        sx += a;
        sy += b;
        sxx += a * a;
        sxy += a * b;
    }
    const double den = n * sxx - sx * sx;
    return den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
}

bool decreasing(const std::vector<double>& y) {
    if (y.size() < 2) return false;
    for (std::size_t i = 1; i < y.size(); ++i)
        if (!(y[i] < y[i - 1])) return false;
    return true;
}

SweepRow run_steady_case(const Workspace& ws, const RunConfig& c, double eps) {
    const auto start = std::chrono::steady_clock::now();
    const VelocityContext& ctx = *ws.ctx;
    const SpatialMesh mesh = make_mesh(c.H, c.n_cells);
    const ChannelData d = channel_data(c, eps);
    SweepRow row;
    row.eps = eps;
    row.alpha = d.alpha;
    SteadySolver solver(ctx, mesh, d);
    SteadyOptions so;
    so.tol_picard = c.tol_picard;
    so.k_max = c.k_max;
    const SteadyResult r = solver.solve(so);
    row.status = to_string(r.status);
    row.note = r.note;
    row.iterations = r.iterations;
    row.mass = r.mass;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (r.status == SteadyStatus::no_steady_solution) {
        row.profile_error_u = row.profile_error_theta = row.divergence = row.boussinesq = nan;
        row.IP_nu_over_eps = row.P_norm = nan;
        row.wall.b2_wall = row.wall.c_jump = row.wall.slip_defect = row.wall.robin_defect = nan;
    } else {
        DistributionField g = r.f;
        g.values += build_fw_field(ws.grid, mesh, Layout::dg_nodal, d).values;
        row.profile = cell_macro(ctx.proj, g);
        const double sigma = ws.coeffs.sigma, kappa = ws.coeffs.kappa;
        row.wall = extract_boundary_observables(row.profile, sigma, kappa, c.lambda, c.theta_minus, c.theta_plus);
        const ChannelVelocity u = channel_velocity(sigma, c.phi2, c.H, c.regime(), c.lambda);
        const ChannelTemperature th =
            channel_temperature(kappa, c.theta_minus, c.theta_plus, c.H, c.regime(), c.lambda);
        double eu = 0, nu2 = 0, et = 0, nt = 0;
        for (std::size_t j = 0; j < row.profile.size(); ++j) {
            const double x = row.profile.x[j];
            eu += std::pow(row.profile.b[j][1] - u(x), 2);
            nu2 += u(x) * u(x);
            et += std::pow(row.profile.c[j] - th(x), 2);
            nt += th(x) * th(x);
        }
        row.profile_error_u = nu2 > 0 ? std::sqrt(eu / nu2) : std::sqrt(eu);
        row.profile_error_theta = nt > 0 ? std::sqrt(et / nt) : std::sqrt(et);
        const LimitResiduals lr = limit_residuals(extract_macro(ctx.proj, g));
        row.divergence = lr.divergence;
        row.boussinesq = lr.boussinesq;
        const NormBundle nb = norms(ws.grid, ctx.proj, ws.mats.nu, solver.wall(), r.f);
        row.IP_nu_over_eps = nb.IP_nu_norm / eps;
        row.P_norm = nb.P_norm;
    }
    row.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

SweepReport run_sweep(const Workspace& ws, const RunConfig& c) {
    SweepReport rep;
    rep.regime = c.regime();
    rep.coeffs = ws.coeffs;
    const std::size_t n = c.eps_list.size();
    rep.rows.resize(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                rep.rows[i] = run_steady_case(ws, c, c.eps_list[i]);
            } catch (const std::exception& e) {
                rep.rows[i] = SweepRow{};
                rep.rows[i].eps = c.eps_list[i];
                rep.rows[i].alpha = c.alpha_for(c.eps_list[i]);
                rep.rows[i].status = "error";
                rep.rows[i].note = e.what();
            }
        }
    };
    const int nw = std::min<int>(c.workers, static_cast<int>(n));
    if (nw <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nw; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    std::vector<double> eps, b2, cj, slip, robin, pu, bous, ip, div;
    for (const SweepRow& r : rep.rows) {
        eps.push_back(r.eps);
        b2.push_back(r.wall.b2_wall);
        cj.push_back(r.wall.c_jump);
        slip.push_back(r.wall.slip_defect);
        robin.push_back(r.wall.robin_defect);
        pu.push_back(r.profile_error_u);
        bous.push_back(r.boussinesq);
        div.push_back(r.divergence);
        ip.push_back(r.IP_nu_over_eps);
    }
    auto add = [&](const std::string& name, const std::vector<double>& y) {
        rep.slopes[name] = log_slope(eps, y);
        rep.monotone[name] = decreasing(y);
    };
    add("b2_wall", b2);
    add("c_jump", cj);
    add("slip_defect", slip);
    add("robin_defect", robin);
    add("profile_error_u", pu);
    add("boussinesq", bous);
    add("divergence", div);
    add("IP_nu_over_eps", ip);
    return rep;
}

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string eps_tag(double eps) {
    std::ostringstream os;
    os << std::setprecision(6) << eps;
    return os.str();
}

json config_json(const RunConfig& c) {
    json j = json::object();
    for (const auto& [k, v] : config_entries(c)) j[k] = v;
    return j;
}

}  // namespace

void write_sweep_outputs(const SweepReport& r, const RunConfig& c, const std::string& dir) {
    std::filesystem::create_directories(dir);
    json rows = json::array();
    for (const SweepRow& row : r.rows) {
        const std::string file = "profile_eps" + eps_tag(row.eps) + ".csv";
        if (row.profile.size()) {
            std::ofstream os(std::filesystem::path(dir) / file);
            write_macro_csv(os, row.profile);
        }
        rows.push_back({{"eps", row.eps},
                        {"alpha", row.alpha},
                        {"status", row.status},
                        {"note", row.note},
                        {"picard_iterations", row.iterations},
                        {"b2_wall", number(row.wall.b2_wall)},
                        {"c_jump", number(row.wall.c_jump)},
                        {"slip_defect", number(row.wall.slip_defect)},
                        {"robin_defect", number(row.wall.robin_defect)},
                        {"profile_error_u", number(row.profile_error_u)},
                        {"profile_error_theta", number(row.profile_error_theta)},
                        {"divergence", number(row.divergence)},
                        {"boussinesq", number(row.boussinesq)},
                        {"IP_nu_over_eps", number(row.IP_nu_over_eps)},
                        {"P_norm", number(row.P_norm)},
                        {"mass", number(row.mass)},
                        {"profile_csv", row.profile.size() ? file : ""}});
    }
    json slopes = json::object(), mono = json::object();
    for (const auto& [k, v] : r.slopes) slopes[k] = number(v);
    for (const auto& [k, v] : r.monotone) mono[k] = v;
    json j = {{"schema_version", 1},
              {"kind", "sweep"},
              {"config", config_json(c)},
              {"regime", to_string(r.regime)},
              {"transport_coefficients", {{"sigma", r.coeffs.sigma}, {"kappa", r.coeffs.kappa}}},
              {"tolerances", {{"tol_picard", c.tol_picard}, {"k_max", c.k_max}}},
              {"rows", rows},
              {"slopes", slopes},
              {"monotone_decrease", mono}};
    std::ofstream os(std::filesystem::path(dir) / "summary.json");
    os << j.dump(2) << '\n';
}

void write_verify_outputs(const std::vector<CheckResult>& checks, const RunConfig& c, const std::string& dir) {
    std::filesystem::create_directories(dir);
    json arr = json::array();
    bool all = true;
    for (const CheckResult& r : checks) {
        all = all && r.pass;
        arr.push_back({{"name", r.name},
                       {"value", number(r.value)},
                       {"tolerance", number(r.tolerance)},
                       {"pass", r.pass},
                       {"detail", r.detail}});
    }
    json j = {{"schema_version", 1}, {"kind", "verify"}, {"config", config_json(c)}, {"checks", arr}, {"pass", all}};
    std::ofstream os(std::filesystem::path(dir) / "verify.json");
    os << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------------------------
// Verification suite

double tau_Q_for(int n) {
    if (n >= 16) return 1e-2;
    if (n >= 12) return 2e-2;
    return 5e-2;
}

double tau_q_for(int n) {
    if (n >= 16) return 1e-3;
    if (n >= 12) return 1e-2;
    return 0.5;
}

namespace {

CheckResult check(std::string name, double value, double tol, std::string detail = {}) {
    CheckResult r;
    r.name = std::move(name);
    r.value = value;
    r.tolerance = tol;
    r.pass = std::isfinite(value) && value <= tol;
    r.detail = std::move(detail);
    return r;
}

}  // namespace

std::vector<CheckResult> run_verify(const Workspace& ws, const RunConfig& c, const VerifyOptions& opt) {
    const VelocityGrid& g = ws.grid;
    const double tq = tau_q_for(g.n_per_axis);
    const double h3 = g.cell_volume();
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::vector<CheckResult> out;

    {
        auto m = [&](const Polynomial& p) { return moment(g, g.mu, p); };
        const double e = std::max({std::abs(m([](const Vec3& v) { return v[0] * v[0] * (v.squaredNorm() - 10.0); }) + 5.0),
                                   std::abs(m([](const Vec3& v) { return (v.squaredNorm() - 5.0) * v[0] * v[0]; })),
                                   std::abs(m([](const Vec3& v) {
                                                return (v.squaredNorm() - 5.0) * 0.5 * (v.squaredNorm() - 3.0) * v[0] * v[0];
                                            }) - 5.0),
                                   std::abs(m([](const Vec3& v) { return v[0] * v[0] * v[1] * v[1]; }) - 1.0),
                                   std::abs(m([](const Vec3& v) { return std::pow(v[0], 4); }) - 3.0)});
        out.push_back(check("moment_identities", e, tq));
    }
    {
        double e = 0.0;
        for (int a = 0; a < 3; ++a)
            for (int s : {1, -1}) {
                Vec3 n = Vec3::Zero();
                n[a] = 1.0;
                e = std::max(e, std::abs(std::sqrt(2.0 * M_PI) * std::abs(half_flux(g, g.mu, n, s)) - 1.0));
            }
        out.push_back(check("half_flux_identity", e, tq));
    }
    {
        const Eigen::MatrixXd X = collision_invariants(g);
        double e = 0.0;
        for (int i = 0; i < 5; ++i) {
            const VelocityFunction x = X.col(i);
            e = std::max(e, apply_L(ws.mats, x).cwiseAbs().maxCoeff() / ws.mats.nu.cwiseProduct(x).cwiseAbs().maxCoeff());
        }
        out.push_back(check("L_null_space", e, 1e-3));
    }
    {
        const Eigen::MatrixXd& K = ws.mats.K;
        const double e = (K - K.transpose()).cwiseAbs().maxCoeff() / K.cwiseAbs().maxCoeff();
        std::ostringstream d;
        d << "asymmetry before symmetrisation " << ws.mats.raw_asymmetry;
        out.push_back(check("K_symmetry", e, 1e-6, d.str()));
    }
    {
        double worst = std::numeric_limits<double>::infinity();
        int bad = 0;
        for (int t = 0; t < 200; ++t) {
            VelocityFunction f(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) f[i] = nd(rng) * std::pow(g.mu[i], 0.25);
            const Coercivity co = coercivity_check(g, ws.mats, ws.ctx->proj, f);
            if (co.in_null_space) continue;
            worst = std::min(worst, co.ratio_nu);
            if (!(co.ratio_nu > 0.0)) ++bad;
        }
        CheckResult r = check("L_semi_positivity", static_cast<double>(bad), 0.0);
        std::ostringstream d;
        d << "min <f,Lf>/|(I-P)f|_nu^2 over 200 samples: " << worst;
        r.detail = d.str();
        out.push_back(r);
    }
    {
        const VelocityFunction q0 = q_full(*ws.kernel, g.mu, g.mu);
        const double rel0 = q0.cwiseAbs().maxCoeff() / (ws.mats.nu.cwiseProduct(g.mu)).cwiseAbs().maxCoeff();
        const Eigen::MatrixXd X = collision_invariants(g);
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            VelocityFunction F(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) F[i] = g.mu[i] * (0.5 + ud(rng));
            const VelocityFunction Q = q_full(*ws.kernel, F, F);
            const VelocityFunction loss = F.cwiseProduct(ws.kernel->frequency_matrix() * F);
            const VelocityFunction scale = (Q + loss).cwiseAbs() + loss;
            for (int k = 0; k < 5; ++k) {
                const VelocityFunction phi = X.col(k).cwiseQuotient(g.sqrt_mu);
                const double num = std::abs(h3 * Q.dot(phi));
                const double den = h3 * scale.dot(phi.cwiseAbs());
                if (den > 0) worst = std::max(worst, num / den);
            }
        }
        out.push_back(check("Q_equilibrium", rel0, tau_Q_for(g.n_per_axis)));
        out.push_back(check("Q_conservation", worst, tau_Q_for(g.n_per_axis)));
    }
    {
        double worst = 0.0;
        for (double alpha : {0.0, 0.3, 1.0}) {
            WallModel wall = build_slab_wall(g, alpha, 0.1, -0.05, 0.05);
            if (opt.break_reflection)
                for (WallFace& f : wall.faces)
                    for (int i : f.incoming) f.reflect[i] = i;
            for (std::size_t face = 0; face < wall.faces.size(); ++face)
                for (int t = 0; t < 20; ++t) {
                    VelocityFunction F(g.size());
                    for (std::size_t i = 0; i < g.size(); ++i) F[i] = g.mu[i] * (0.2 + 1.6 * ud(rng));
                    const VelocityFunction G = apply_maxwell_bc_absolute(wall, static_cast<int>(face), F);
                    const WallFace& fc = wall.faces[face];
                    const double o = outgoing_flux(fc, G), in = incoming_flux(fc, G);
                    worst = std::max(worst, std::abs(in - o) / o);
                }
        }
        out.push_back(check("bc_flux_conservation", worst, tq));
    }
    {
        const WallModel wall = build_slab_wall(g, 1.0, 0.1, -0.05, 0.05);
        double idem = 0.0, q1 = 0.0, q2 = 0.0;
        for (const WallFace& face : wall.faces) {
            VelocityFunction f(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) f[i] = nd(rng) * std::pow(g.mu[i], 0.3);
            const VelocityFunction p = apply_P_gamma(g, face, f);
            idem = std::max(idem, (apply_P_gamma(g, face, p) - p).cwiseAbs().maxCoeff() /
                                      std::max(p.cwiseAbs().maxCoeff(), 1e-300));
            auto incoming_null = [&](const VelocityFunction& r) {
                double s = 0.0, a = 0.0;
                for (int i : face.incoming) {
                    s += r[i] * g.sqrt_mu[i] * face.flux[i];
                    a += std::abs(r[i] * g.sqrt_mu[i] * face.flux[i]);
                }
                return a > 0 ? std::abs(s) / a : 0.0;
            };
            q1 = std::max(q1, incoming_null(apply_Q1(g, face, f, 0.1)));
            q2 = std::max(q2, incoming_null(apply_Q2(g, face, build_phi_eps(g, face.theta_w, 0.0, 0.1), 0.1)));
        }
        out.push_back(check("P_gamma_idempotence", idem, tq));
        out.push_back(check("Q1_flux_nullity", q1, tq));
        out.push_back(check("Q2_flux_nullity", q2, tq));
    }
    {
        std::vector<double> eps{0.2, 0.1, 0.05}, res;
        for (double e : eps) res.push_back(expand_wall_maxwellian(g, 0.1, e).residual);
        const double s = log_slope(eps, res);
        std::ostringstream d;
        d << "slope " << s;
        out.push_back(check("Mw_expansion_order", std::abs(s - 2.0), 0.2, d.str()));
    }
    {
        const CensusOutcome co = run_census(c, c.census_eps);
        std::ostringstream d;
        d << "eps " << c.census_eps << " interior max " << co.interior.max_bounces << ", boundary max "
          << co.boundary.max_bounces << ", lemma margin " << co.interior.lemma_margin;
        const bool ok = co.interior.max_bounces <= 1 && co.boundary.max_bounces == 0 &&
                        (co.interior.lemma_checks == 0 || co.interior.lemma_margin >= 1.0);
        CheckResult r = check("bounce_census", ok ? 0.0 : 1.0, 0.0, d.str());
        out.push_back(r);
    }
    {
        const Domain d = make_disk(1.0);
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            const Vec3 y(0.3 * (ud(rng) - 0.5), 0.3 * (ud(rng) - 0.5), ud(rng));
            const Vec3 v(ud(rng) - 0.5, ud(rng) - 0.5, ud(rng) - 0.5);
            const double s = 1.0, tau = 1.0 - (0.2 + 0.5 * ud(rng));
            const double J = flight_jacobian(d, 1.0, {}, 2, y, v, s, tau);
            worst = std::max(worst, std::abs(J - std::pow(tau - s, 3)) / std::pow(s - tau, 3));
        }
        out.push_back(check("flight_jacobian", worst, 1e-6));
    }
    {
        double e = 0.0;
        for (int t = 0; t < 10; ++t) {
            VelocityFunction f(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) f[i] = nd(rng) * std::pow(g.mu[i], 0.25);
            const VelocityFunction p = ws.ctx->proj.P(f);
            e = std::max(e, (ws.ctx->proj.P(p) - p).cwiseAbs().maxCoeff() / p.cwiseAbs().maxCoeff());
        }
        out.push_back(check("projection_idempotence", e, 1e-12));
    }
    {
        const SpatialMesh mesh = make_mesh(c.H, c.n_cells);
        const ChannelData d = channel_data(c, c.eps_list.front());
        PositivityStepper ps(*ws.ctx, mesh, d, 0.9 * d.eps * mesh.dx / (g.v_max - 0.5 * g.h));
        DistributionField F(static_cast<int>(g.size()), mesh, Layout::cell_average, FieldMode::absolute);
        for (int j = 0; j < mesh.n_cells; ++j)
            for (std::size_t i = 0; i < g.size(); ++i) F.values(i, j) = 2.0 * ud(rng) * g.mu[i];
        ps.set_state(F);
        double worst = 0.0;
        for (int k = 0; k < 10; ++k) {
            ps.step();
            worst = std::min(worst, ps.min_value());
        }
        out.push_back(check("positivity_preservation", -worst, 0.0));
    }
    {
        const SpatialMesh mesh = make_mesh(c.H, c.n_cells);
        const ChannelData d = channel_data(c, c.eps_list.front());
        UnsteadyOptions uo;
        uo.dt = 0.5 * d.eps * mesh.dx / (g.v_max - 0.5 * g.h);
        const DistributionField bg = steady_background(g, nullptr, mesh, d);
        UnsteadyStepper st(*ws.ctx, mesh, d, bg, uo);
        DistributionField f(static_cast<int>(g.size()), mesh, Layout::cell_average);
        for (int j = 0; j < mesh.n_cells; ++j)
            for (std::size_t i = 0; i < g.size(); ++i) f.values(i, j) = c.amplitude * nd(rng) * g.sqrt_mu[i];
        st.set_state(f);
        double prev = st.mass(), worst = 0.0;
        for (int k = 0; k < 5; ++k) {
            st.step();
            worst = std::max(worst, std::abs(st.mass() - prev));
            prev = st.mass();
        }
        out.push_back(check("mass_conservation", worst, 1e-8));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Census

CensusOutcome run_census(const RunConfig& c, double eps) {
    const Domain d = c.census_domain == "disk" ? make_disk(c.census_size) : make_slab(c.census_size);
    std::mt19937_64 rng(c.census_seed);
    const auto si = census_interior_samples(d, eps, c.census_samples, c.census_v_cap, c.census_eta, rng);
    const auto sb = census_boundary_samples(d, eps, c.census_samples, c.census_v_cap, c.census_eta, rng);
    CensusOutcome o;
    o.interior = bounce_census(d, eps, c.census_T0, si);
    o.boundary = bounce_census(d, eps, c.census_T0, sb);
    o.c_xi = d.c_xi();
    return o;
}

// ---------------------------------------------------------------------------------------------
// Unsteady run

UnsteadyOutcome run_unsteady(const Workspace& ws, const RunConfig& c, double eps, const std::string& out_dir) {
    const VelocityGrid& g = ws.grid;
    const SpatialMesh mesh = make_mesh(c.H, c.n_cells);
    const ChannelData d = channel_data(c, eps);
    DistributionField bg;
    if (d.alpha > 0.0) {
        SteadySolver solver(*ws.ctx, mesh, d);
        SteadyOptions so;
        so.tol_picard = c.tol_picard;
        so.k_max = c.k_max;
        const SteadyResult r = solver.solve(so);
        if (r.status != SteadyStatus::converged)
            throw std::runtime_error("steady background did not converge: " + r.note);
        bg = steady_background(g, &r.f, mesh, d);
    } else {
        bg = steady_background(g, nullptr, mesh, d);
    }
    UnsteadyOptions uo;
    uo.cfl = c.cfl;
    uo.dt = c.dt > 0.0 ? c.dt : 0.5 * c.cfl * eps * mesh.dx / (g.v_max - 0.5 * g.h);
    UnsteadyStepper st(*ws.ctx, mesh, d, bg, uo);

    if (!c.restart.empty()) {
        st.restore(read_checkpoint(c.restart));
    } else {
        std::mt19937_64 rng(c.seed);
        std::normal_distribution<double> nd;
        DistributionField f(static_cast<int>(g.size()), mesh, Layout::cell_average);
        for (int j = 0; j < mesh.n_cells; ++j)
            for (std::size_t i = 0; i < g.size(); ++i) f.values(i, j) = c.amplitude * nd(rng) * g.sqrt_mu[i];
        const double m = field_mass(g, f) / (mesh.n_cells * mesh.dx * g.mu.sum() * g.cell_volume());
        f.values -= m * g.sqrt_mu.replicate(1, mesh.n_cells);
        st.set_state(f);
    }

    UnsteadyOutcome o;
    o.dt = uo.dt;
    EnergyTracker tracker(c.energy_lambda, eps, d.alpha);
    auto bundle = [&](const DistributionField& f) { return norms(g, ws.ctx->proj, ws.mats.nu, st.wall(), f); };
    std::ofstream trace;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        trace.open(std::filesystem::path(out_dir) / "trace.csv");
        write_trace_header(trace);
    }
    auto emit = [&](const NormBundle& nb, const std::optional<NormBundle>& ft) {
        tracker.record(st.time(), nb, ft);
        TraceRow row{st.time(), nb, tracker.energy(), tracker.dissipation()};
        o.trace.push_back(row);
        if (trace) write_trace_row(trace, row);
    };
    NormBundle nb = bundle(st.state());
    o.initial_norm = nb.norm;
    emit(nb, std::nullopt);
    double prev_mass = st.mass();
    for (int k = 0; k < c.steps; ++k) {
        DistributionField before = st.state();
        st.step();
        const double m = st.mass();
        o.max_mass_drift = std::max(o.max_mass_drift, std::abs(m - prev_mass));
        prev_mass = m;
        DistributionField ft = st.state();
        ft.values = (ft.values - before.values) / uo.dt;
        nb = bundle(st.state());
        emit(nb, bundle(ft));
        ++o.steps;
        if (!out_dir.empty() && c.checkpoint_every > 0 && st.steps() % c.checkpoint_every == 0)
            write_checkpoint((std::filesystem::path(out_dir) / ("checkpoint_" + std::to_string(st.steps()) + ".bin")).string(),
                             st.checkpoint());
    }
    o.final_norm = nb.norm;
    o.energy = tracker.energy();
    o.dissipation = tracker.dissipation();
    // decay rate from the second half of the trace
    std::vector<double> ts, ls;
    for (std::size_t i = o.trace.size() / 2; i < o.trace.size(); ++i) {
        ts.push_back(o.trace[i].t);
        ls.push_back(std::log(std::max(o.trace[i].n.norm, 1e-300)));
    }
    if (ts.size() >= 2) {
        double mt = 0, ml = 0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            mt += ts[i];
            ml += ls[i];
        }
        mt /= ts.size();
        ml /= ts.size();
        double num = 0, den = 0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            num += (ts[i] - mt) * (ls[i] - ml);
            den += (ts[i] - mt) * (ts[i] - mt);
        }
        o.decay_rate = den > 0 ? -num / den : 0.0;
    }
    if (!out_dir.empty()) {
        std::ofstream mc(std::filesystem::path(out_dir) / "macro_final.csv");
        write_macro_csv(mc, extract_macro(ws.ctx->proj, st.state()));
        write_checkpoint((std::filesystem::path(out_dir) / "checkpoint_final.bin").string(), st.checkpoint());
        json j = {{"schema_version", 1},
                  {"kind", "unsteady"},
                  {"config", config_json(c)},
                  {"eps", eps},
                  {"alpha", d.alpha},
                  {"dt", o.dt},
                  {"steps", o.steps},
                  {"time", st.time()},
                  {"max_mass_drift_per_step", o.max_mass_drift},
                  {"initial_norm", o.initial_norm},
                  {"final_norm", o.final_norm},
                  {"decay_rate", o.decay_rate},
                  {"energy", o.energy},
                  {"dissipation", o.dissipation}};
        std::ofstream os(std::filesystem::path(out_dir) / "unsteady.json");
        os << j.dump(2) << '\n';
    }
    return o;
}

}  // namespace kinetic
