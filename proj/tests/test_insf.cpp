#include "doctest.h"

#include "kinetic/insf.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <string>

using namespace kinetic;

namespace {

// k y'' = -s on [-H, H] with k y'(+-H) (outward) + r (y - g+-) = 0, r = inf meaning y = g.
// Second-order finite differences with ghost points on n intervals.
Eigen::VectorXd fd_bvp(double k, double s, double H, double r, double gm, double gp, int n) {
    const double dx = 2 * H / n;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Eigen::VectorXd b = Eigen::VectorXd::Constant(n + 1, -s * dx * dx / k);
    for (int i = 1; i < n; ++i) {
        A(i, i - 1) = 1;
        A(i, i) = -2;
        A(i, i + 1) = 1;
    }
    if (std::isinf(r)) {
        A(0, 0) = 1;
        b[0] = gm;
        A(n, n) = 1;
        b[n] = gp;
    } else {
        // ghost y_{-1} = y_1 - 2 dx y'(-H), with -k y'(-H) + r (y_0 - gm) = 0
        A(0, 0) = -2 - 2 * dx * r / k;
        A(0, 1) = 2;
        b[0] -= 2 * dx * r * gm / k;
        A(n, n) = -2 - 2 * dx * r / k;
        A(n, n - 1) = 2;
        b[n] -= 2 * dx * r * gp / k;
    }
    return A.fullPivLu().solve(b);
}

}  // namespace

TEST_SUITE("insf_reference") {

TEST_CASE("regime names") {
    CHECK(parse_regime("dirichlet") == Regime::dirichlet);
    CHECK(parse_regime("navier") == Regime::navier);
    CHECK(parse_regime("perfect-slip") == Regime::perfect_slip);
    CHECK(to_string(Regime::perfect_slip) == "perfect-slip");
    CHECK_THROWS_AS(parse_regime("robin"), std::invalid_argument);
}

TEST_CASE("dirichlet poiseuille and conduction match the finite-difference solution") {
    const double sigma = 0.0897, kappa = 0.139, phi2 = 0.1, H = 1.0;
    const ChannelVelocity u = channel_velocity(sigma, phi2, H, Regime::dirichlet);
    const ChannelTemperature t = channel_temperature(kappa, -0.05, 0.05, H, Regime::dirichlet);
    const int n = 40;
    const Eigen::VectorXd uf = fd_bvp(sigma, phi2, H, INFINITY, 0, 0, n);
    const Eigen::VectorXd tf = fd_bvp(kappa, 0.0, H, INFINITY, -0.05, 0.05, n);
    for (int i = 0; i <= n; ++i) {
        const double x = -H + 2 * H * i / n;
        CHECK(u(x) == doctest::Approx(uf[i]).epsilon(1e-10));
        CHECK(t(x) == doctest::Approx(tf[i]).scale(1.0).epsilon(1e-12));
    }
    CHECK(u(0) == doctest::Approx(phi2 / (2 * sigma)));
    CHECK(u(H) == doctest::Approx(0.0).scale(1.0));
    CHECK(u.derivative(0.5) == doctest::Approx(-phi2 * 0.5 / sigma));
}

TEST_CASE("navier slip and robin temperature match the finite-difference solution") {
    const double sigma = 0.0897, kappa = 0.139, phi2 = 0.1, H = 1.0;
    for (double lambda : {0.3, 1.0, 5.0}) {
        const ChannelVelocity u = channel_velocity(sigma, phi2, H, Regime::navier, lambda);
        const ChannelTemperature t = channel_temperature(kappa, -0.05, 0.05, H, Regime::navier, lambda);
        const int n = 40;
        const Eigen::VectorXd uf = fd_bvp(sigma, phi2, H, lambda, 0, 0, n);
        const Eigen::VectorXd tf = fd_bvp(kappa, 0.0, H, 0.8 * lambda, -0.05, 0.05, n);
        for (int i = 0; i <= n; ++i) {
            const double x = -H + 2 * H * i / n;
            CHECK(u(x) == doctest::Approx(uf[i]).epsilon(1e-9));
            CHECK(t(x) == doctest::Approx(tf[i]).scale(1.0).epsilon(1e-12));
        }
        CHECK(sigma * u.derivative(H) + lambda * u(H) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
    }
}

TEST_CASE("navier tends to dirichlet as lambda grows") {
    const ChannelVelocity d = channel_velocity(0.09, 0.1, 1.0, Regime::dirichlet);
    const ChannelVelocity n = channel_velocity(0.09, 0.1, 1.0, Regime::navier, 1e8);
    CHECK(n(0.3) == doctest::Approx(d(0.3)).epsilon(1e-7));
    const ChannelTemperature td = channel_temperature(0.14, -0.1, 0.1, 1.0, Regime::dirichlet);
    const ChannelTemperature tn = channel_temperature(0.14, -0.1, 0.1, 1.0, Regime::navier, 1e8);
    CHECK(tn.A == doctest::Approx(td.A).epsilon(1e-7));
}

TEST_CASE("perfect slip with a force has no steady solution") {
    const ChannelVelocity u = channel_velocity(0.09, 0.1, 1.0, Regime::perfect_slip);
    CHECK_FALSE(u.has_steady_solution);
    CHECK(u.note.find("no-steady-solution") == 0);
    const ChannelVelocity z = channel_velocity(0.09, 0.1, 1.0, Regime::navier, 0.0);
    CHECK_FALSE(z.has_steady_solution);
    const ChannelVelocity free = channel_velocity(0.09, 0.0, 1.0, Regime::perfect_slip);
    CHECK(free.has_steady_solution);
    CHECK(channel_temperature(0.14, -0.1, 0.1, 1.0, Regime::perfect_slip).adiabatic_degenerate);
}

TEST_CASE("invalid coefficients") {
    CHECK_THROWS_AS(channel_velocity(0.0, 0.1, 1.0, Regime::dirichlet), std::invalid_argument);
    CHECK_THROWS_AS(channel_velocity(0.1, 0.1, -1.0, Regime::dirichlet), std::invalid_argument);
    CHECK_THROWS_AS(channel_temperature(-0.1, 0, 0, 1.0, Regime::dirichlet), std::invalid_argument);
}

TEST_CASE("profile csv") {
    const ChannelVelocity u = channel_velocity(0.1, 0.2, 1.0, Regime::dirichlet);
    const ChannelTemperature t = channel_temperature(0.1, -0.1, 0.1, 1.0, Regime::dirichlet);
    std::ostringstream os;
    write_profile_csv(os, u, t, 5);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "x1,u2,theta");
    int rows = 0;
    double x = 0, uu = 0, th = 0;
    char c1, c2;
    while (is >> x >> c1 >> uu >> c2 >> th) {
        CHECK(uu == doctest::Approx(u(x)));
        CHECK(th == doctest::Approx(t(x)));
        ++rows;
    }
    CHECK(rows == 5);
    CHECK(x == doctest::Approx(1.0));
}

}
