#include "doctest.h"

#include "support.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include <sys/wait.h>

using namespace kinetic;

namespace {

MacroFields injected(const SpatialMesh& mesh, const ChannelVelocity& u, const ChannelTemperature& t) {
    MacroFields m;
    m.dx = mesh.dx;
    for (double x : mesh.centers) {
        m.x.push_back(x);
        m.a.push_back(-t(x));
        m.c.push_back(t(x));
        m.b.push_back({0.0, u(x), 0.0});
    }
    return m;
}

int run(const std::string& args, const std::string& log) {
    const std::string cmd = std::string(KINSIM_PATH) + " " + args + " > " + log + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE("limit_harness") {

TEST_CASE("config defaults and overrides") {
    const RunConfig d = parse_config("");
    CHECK(d.n_per_axis == 12);
    CHECK(d.eps_list == std::vector<double>{0.1, 0.05, 0.025});
    CHECK(d.regime() == Regime::dirichlet);
    CHECK(d.alpha_for(0.05) == 1.0);

    const RunConfig c = parse_config("[sweep]\nalpha_rule = proportional\nlambda = 1.5\neps = 0.2, 0.1\n[channel]\nphi2 = 0.3\n",
                                     {"channel.phi2=0.4", "grid.n_per_axis=16"});
    CHECK(c.regime() == Regime::navier);
    CHECK(c.alpha_for(0.1) == doctest::Approx(std::sqrt(2 * std::numbers::pi) * 1.5 * 0.1));
    CHECK(c.eps_list == std::vector<double>{0.2, 0.1});
    CHECK(c.phi2 == 0.4);
    CHECK(c.n_per_axis == 16);
    CHECK(parse_config("[sweep]\nalpha_rule = zero\n").regime() == Regime::perfect_slip);

    const auto e1 = config_entries(c), e2 = config_entries(parse_config("[sweep]\nalpha_rule = proportional\nlambda = 1.5\neps = 0.2, 0.1\n",
                                                                       {"channel.phi2=0.4", "grid.n_per_axis=16"}));
    CHECK(e1 == e2);
    CHECK(e1.front().first == "grid.n_per_axis");
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse_config("[grid]\nn_per_axiss = 12\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("", {"grid.bogus=1"}), ConfigError);
    CHECK_THROWS_AS(parse_config("", {"grid.n_per_axis"}), ConfigError);
    CHECK_THROWS_AS(parse_config("[grid]\nn_per_axis = twelve\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[grid]\nn_per_axis = 11\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[sweep]\neps = 0.1, x\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[sweep]\nalpha_rule = sometimes\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("n_per_axis = 12\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[grid\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/kinetic.ini"), ConfigError);
}

TEST_CASE("slopes and trends") {
    CHECK(log_slope({0.1, 0.05, 0.025}, {0.02, 0.005, 0.00125}) == doctest::Approx(2.0));
    CHECK(log_slope({1, 2, 4}, {3, 3, 3}) == doctest::Approx(0.0).scale(1.0));
    CHECK(decreasing({3, 2, 1}));
    CHECK_FALSE(decreasing({3, 3, 1}));
    CHECK_FALSE(decreasing({1, 2, 0}));
    CHECK(tau_q_for(16) == 1e-3);
    CHECK(tau_q_for(12) == 1e-2);
    CHECK(tau_Q_for(16) == 1e-2);
}

TEST_CASE("boundary observables of injected profiles") {
    const SpatialMesh mesh = make_mesh(1.0, 16);
    const double sigma = 0.0897, kappa = 0.139, lambda = 1.0;
    const ChannelVelocity un = channel_velocity(sigma, 0.1, 1.0, Regime::navier, lambda);
    const ChannelTemperature tn = channel_temperature(kappa, -0.05, 0.05, 1.0, Regime::navier, lambda);
    const BoundaryObservables n = extract_boundary_observables(injected(mesh, un, tn), sigma, kappa, lambda, -0.05, 0.05);
    CHECK(n.slip_defect < 1e-14);
    CHECK(n.robin_defect < 1e-14);
    CHECK(n.b2_wall == doctest::Approx(un.slip));
    CHECK(n.c_jump == doctest::Approx(0.05 - tn(1.0)));

    const ChannelVelocity ud = channel_velocity(sigma, 0.1, 1.0, Regime::dirichlet);
    const ChannelTemperature td = channel_temperature(kappa, -0.05, 0.05, 1.0, Regime::dirichlet);
    const BoundaryObservables d = extract_boundary_observables(injected(mesh, ud, td), sigma, kappa, lambda, -0.05, 0.05);
    CHECK(d.b2_wall < 1e-14);
    CHECK(d.c_jump < 1e-15);
    // the Dirichlet profile violates the slip condition by sigma |u'(H)|
    CHECK(d.slip_defect == doctest::Approx(0.1));
}

TEST_CASE("steady case at eps 0.1 reports finite observables") {
    const Workspace& ws = kt::workspace12();
    RunConfig c;
    const SweepRow r = run_steady_case(ws, c, 0.1);
    CHECK(r.status == "converged");
    CHECK(std::isfinite(r.wall.slip_defect));
    CHECK(std::isfinite(r.wall.robin_defect));
    CHECK(r.profile_error_u < 0.1);
    CHECK(r.profile_error_theta < 0.5);
    CHECK(std::abs(r.mass) < 1e-12);
    CHECK(r.profile.size() == 16);
}

TEST_CASE("cli exit codes") {
    const auto dir = kt::scratch_dir("cli");
    const std::string log = (dir / "log.txt").string();
    CHECK(run("verify --set grid.bogus=1 -o " + dir.string(), log) == 2);
    CHECK(slurp(log).find("unknown setting 'grid.bogus'") != std::string::npos);
    CHECK(run("steady --set grid.n_per_axis=13 -o " + dir.string(), log) == 2);
    CHECK(run("frobnicate", log) == 2);
    CHECK(run("", log) == 2);
    CHECK(run("census -c /nonexistent.ini", log) == 2);
    {
        std::ofstream ini(dir / "bad.ini");
        ini << "[channel]\nphi2 = 0.1\nwidth = 2\n";
    }
    CHECK(run("census -c " + (dir / "bad.ini").string(), log) == 2);
}

TEST_CASE("cli census writes a versioned summary") {
    const auto dir = kt::scratch_dir("census");
    const std::string log = (dir / "log.txt").string();
    CHECK(run("census --set census.samples=100 -o " + dir.string(), log) == 0);
    const auto j = nlohmann::json::parse(slurp((dir / "census.json").string()));
    CHECK(j["schema_version"] == 1);
    CHECK(j["interior"]["max_bounces"].get<int>() <= 1);
    CHECK(j["boundary"]["max_bounces"] == 0);
}

TEST_CASE("verify names the broken reflection map") {
    const auto dir = kt::scratch_dir("fault");
    const std::string log = (dir / "log.txt").string();
    CHECK(run("verify --break-reflection -o " + dir.string(), log) == 1);
    const std::string out = slurp(log);
    CHECK(out.find("FAIL bc_flux_conservation") != std::string::npos);
    const auto j = nlohmann::json::parse(slurp((dir / "verify.json").string()));
    int failed = 0;
    for (const auto& c : j["checks"]) {
        if (!c["pass"].get<bool>()) {
            ++failed;
            CHECK(c["name"] == "bc_flux_conservation");
        }
    }
    CHECK(failed == 1);
}

}
