#include "kinetic/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace kinetic;
using json = nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
};

RunConfig configure(const Common& o) {
    RunConfig c = o.config.empty() ? parse_config("", o.sets) : load_config(o.config, o.sets);
    if (!o.out.empty()) c.out_dir = o.out;
    return c;
}

void add_common(CLI::App* app, Common& o) {
    app->add_option("-c,--config", o.config, "INI configuration file");
    app->add_option("--set", o.sets, "override, section.key=value")->take_all();
    app->add_option("-o,--out", o.out, "output directory");
}

void write_json(const std::string& dir, const std::string& name, const json& j) {
    std::filesystem::create_directories(dir);
    std::ofstream os(std::filesystem::path(dir) / name);
    os << j.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

int cmd_verify(const Common& o, bool broken) {
    const RunConfig c = configure(o);
    auto ws = make_workspace(c, false);
    VerifyOptions vo;
    vo.break_reflection = broken;
    const auto checks = run_verify(*ws, c, vo);
    write_verify_outputs(checks, c, c.out_dir);
    int failed = 0;
    for (const CheckResult& r : checks) {
        std::cout << (r.pass ? "ok   " : "FAIL ") << r.name << "  value " << r.value << "  tol " << r.tolerance;
        if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
        std::cout << '\n';
        failed += !r.pass;
    }
    if (failed) {
        std::cerr << failed << " check(s) failed\n";
        return 1;
    }
    return 0;
}

int cmd_steady(const Common& o, double eps) {
    RunConfig c = configure(o);
    if (eps <= 0) eps = c.eps_list.front();
    c.eps_list = {eps};
    validate(c);
    auto ws = make_workspace(c);
    const SweepRow row = run_steady_case(*ws, c, eps);
    SweepReport r;
    r.regime = c.regime();
    r.coeffs = ws->coeffs;
    r.rows = {row};
    write_sweep_outputs(r, c, c.out_dir);
    std::cout << "eps " << eps << " alpha " << row.alpha << " status " << row.status << " iterations "
              << row.iterations << " profile error " << row.profile_error_u << " (" << row.runtime << " s)\n";
    if (!row.note.empty()) std::cout << row.note << '\n';
    return row.status == "converged" ? 0 : 1;
}

int cmd_sweep(const Common& o) {
    const RunConfig c = configure(o);
    const auto t0 = std::chrono::steady_clock::now();
    auto ws = make_workspace(c);
    const SweepReport r = run_sweep(*ws, c);
    write_sweep_outputs(r, c, c.out_dir);
    int bad = 0;
    for (const SweepRow& row : r.rows) {
        std::cerr << "eps " << row.eps << " alpha " << row.alpha << " " << row.status << " iterations "
                  << row.iterations << " b2_wall " << row.wall.b2_wall << " profile error " << row.profile_error_u
                  << " (" << row.runtime << " s)\n";
        const bool expected = c.alpha_rule == AlphaRule::zero && row.status == "no-steady-solution";
        bad += !(row.status == "converged" || expected);
    }
    std::cerr << "total " << seconds_since(t0) << " s\n";
    return bad ? 1 : 0;
}

int cmd_unsteady(const Common& o, double eps) {
    const RunConfig c = configure(o);
    if (eps <= 0) eps = c.eps_list.front();
    auto ws = make_workspace(c, false);
    const UnsteadyOutcome u = run_unsteady(*ws, c, eps, c.out_dir);
    std::cout << "steps " << u.steps << " dt " << u.dt << " max mass drift/step " << u.max_mass_drift << " norm "
              << u.initial_norm << " -> " << u.final_norm << " decay rate " << u.decay_rate << '\n';
    return u.max_mass_drift <= 1e-8 ? 0 : 1;
}

int cmd_census(const Common& o, double eps) {
    const RunConfig c = configure(o);
    if (eps <= 0) eps = c.census_eps;
    const CensusOutcome co = run_census(c, eps);
    auto rep = [](const CensusReport& r) {
        return json{{"samples", r.samples},
                    {"max_bounces", r.max_bounces},
                    {"lemma_checks", r.lemma_checks},
                    {"lemma_margin", std::isfinite(r.lemma_margin) ? json(r.lemma_margin) : json(nullptr)},
                    {"histogram", r.histogram}};
    };
    write_json(c.out_dir, "census.json",
               {{"schema_version", 1},
                {"kind", "census"},
                {"domain", c.census_domain},
                {"eps", eps},
                {"T0", c.census_T0},
                {"eta", c.census_eta},
                {"seed", c.census_seed},
                {"c_xi", co.c_xi},
                {"interior", rep(co.interior)},
                {"boundary", rep(co.boundary)}});
    std::cout << "eps " << eps << " interior max bounces " << co.interior.max_bounces << ", boundary max bounces "
              << co.boundary.max_bounces << ", lemma margin " << co.interior.lemma_margin << '\n';
    const bool ok = co.interior.max_bounces <= 1 && co.boundary.max_bounces == 0 &&
                    (co.interior.lemma_checks == 0 || co.interior.lemma_margin >= 1.0);
    return ok ? 0 : 1;
}

int cmd_coeffs(const Common& o) {
    const RunConfig c = configure(o);
    auto ws = make_workspace(c);
    write_json(c.out_dir, "coefficients.json",
               {{"schema_version", 1},
                {"kind", "coefficients"},
                {"n_per_axis", c.n_per_axis},
                {"v_max", c.v_max},
                {"sigma", ws->coeffs.sigma},
                {"kappa", ws->coeffs.kappa}});
    std::cout << "sigma " << ws->coeffs.sigma << " kappa " << ws->coeffs.kappa << '\n';
    return ws->coeffs.sigma > 0 && ws->coeffs.kappa > 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kinetic channel simulator and diffusive-limit harness"};
    app.require_subcommand(1);
    Common o;
    double eps = 0.0;
    bool broken = false;

    auto* verify = app.add_subcommand("verify", "run the invariant verification suite");
    add_common(verify, o);
    verify->add_flag("--break-reflection", broken, "fault injection: scramble the specular map");
    auto* steady = app.add_subcommand("steady", "steady channel solve at one eps");
    add_common(steady, o);
    steady->add_option("--eps", eps, "Knudsen number (default: first of sweep.eps)");
    auto* unsteady = app.add_subcommand("unsteady", "evolve a perturbation of the steady state");
    add_common(unsteady, o);
    unsteady->add_option("--eps", eps, "Knudsen number (default: first of sweep.eps)");
    auto* sweep = app.add_subcommand("sweep", "steady solves over the eps list");
    add_common(sweep, o);
    auto* census = app.add_subcommand("census", "bounce census in the stretched domain");
    add_common(census, o);
    census->add_option("--eps", eps, "stretch parameter (default: census.eps)");
    auto* coeffs = app.add_subcommand("coeffs", "transport coefficients sigma and kappa");
    add_common(coeffs, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        if (*verify) return cmd_verify(o, broken);
        if (*steady) return cmd_steady(o, eps);
        if (*unsteady) return cmd_unsteady(o, eps);
        if (*sweep) return cmd_sweep(o);
        if (*census) return cmd_census(o, eps);
        if (*coeffs) return cmd_coeffs(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
