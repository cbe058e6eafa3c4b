#include "doctest.h"

#include "kinetic/diagnostics.hpp"
#include "kinetic/field.hpp"
#include "kinetic/wall.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

using namespace kinetic;

namespace {

const VelocityGrid& grid() {
    static const VelocityGrid g = build_grid(12, 6.0);
    return g;
}

VelocityFunction hydro(const VelocityGrid& g, double a, const Vec3& b, double c) {
    return evaluate(g, [&](const Vec3& v) { return a + b.dot(v) + c * 0.5 * (v.squaredNorm() - 3.0); }).cwiseProduct(g.sqrt_mu);
}

DistributionField profile_field(const VelocityGrid& g, Layout layout) {
    const SpatialMesh m = make_mesh(1.0, 16);
    DistributionField f(static_cast<int>(g.size()), m, layout);
    for (int j = 0; j < f.columns(); ++j) {
        const double x = f.position(j);
        f.values.col(j) = hydro(g, x, Vec3(0.5 * x, 1 - x * x, 0), 0.1 * x);
    }
    return f;
}

int count_fields(const std::string& line) { return 1 + static_cast<int>(std::count(line.begin(), line.end(), ',')); }

}  // namespace

TEST_SUITE("macro_diagnostics") {

TEST_CASE("mesh and layouts") {
    CHECK_THROWS_AS(make_mesh(1.0, 15), std::invalid_argument);
    CHECK_THROWS_AS(make_mesh(0.0, 16), std::invalid_argument);
    const SpatialMesh m = make_mesh(2.0, 16);
    CHECK(m.dx == doctest::Approx(0.25));
    CHECK(m.centers.front() == doctest::Approx(-1.875));
    DistributionField dg(3, m, Layout::dg_nodal);
    CHECK(dg.columns() == 32);
    CHECK(dg.position(0) == doctest::Approx(-2.0));
    CHECK(dg.position(1) == doctest::Approx(-1.75));
    CHECK(dg.position(2) == doctest::Approx(-1.75));
    CHECK(dg.position(31) == doctest::Approx(2.0));
    CHECK(dg.weight(0) == doctest::Approx(0.125));
    dg.values.setRandom();
    const Eigen::MatrixXd avg = dg.cell_averages();
    CHECK(avg.cols() == 16);
    CHECK(avg(1, 5) == doctest::Approx(0.5 * (dg.values(1, 10) + dg.values(1, 11))));
}

TEST_CASE("projector recovers hydrodynamic coefficients") {
    const VelocityGrid& g = grid();
    const MacroProjector P(g);
    const VelocityFunction f = hydro(g, 0.3, Vec3(-0.2, 0.7, 0.1), -0.4);
    const auto q = P.coefficients(f);
    CHECK(q[0] == doctest::Approx(0.3));
    CHECK(q[1] == doctest::Approx(-0.2));
    CHECK(q[2] == doctest::Approx(0.7));
    CHECK(q[3] == doctest::Approx(0.1));
    CHECK(q[4] == doctest::Approx(-0.4));
    CHECK((P.P(f) - f).norm() < 1e-13 * f.norm());

    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    VelocityFunction r(g.size());
    for (auto& x : r) x = nd(rng);
    const VelocityFunction p = P.P(r);
    CHECK((P.P(p) - p).norm() < 1e-12 * p.norm());
    CHECK(std::abs(P.I_minus_P(r).dot(f)) < 1e-10 * r.norm() * f.norm());
    Eigen::MatrixXd cols(g.size(), 2);
    cols.col(0) = r;
    cols.col(1) = f;
    const Eigen::MatrixXd pc = P.P_columns(cols);
    CHECK((pc.col(0) - p).norm() < 1e-12 * p.norm());
}

TEST_CASE("macro fields and limit residuals of injected profiles") {
    const VelocityGrid& g = grid();
    const MacroProjector P(g);
    for (Layout layout : {Layout::cell_average, Layout::dg_nodal}) {
        const DistributionField f = profile_field(g, layout);
        const MacroFields m = extract_macro(P, f);
        REQUIRE(m.size() == static_cast<std::size_t>(f.columns()));
        for (std::size_t j = 0; j < m.size(); ++j) {
            CHECK(m.a[j] == doctest::Approx(m.x[j]).scale(1.0));
            CHECK(m.b[j][1] == doctest::Approx(1 - m.x[j] * m.x[j]));
            CHECK(m.c[j] == doctest::Approx(0.1 * m.x[j]).scale(1.0));
        }
        // d1 b1 = 0.5 and d1 (a + c) = 1.1 on a channel of length 2
        const LimitResiduals r = limit_residuals(m);
        CHECK(r.divergence == doctest::Approx(0.5 * std::sqrt(2.0)));
        CHECK(r.boussinesq == doctest::Approx(1.1 * std::sqrt(2.0)));
    }
}

TEST_CASE("mean value") {
    const VelocityGrid& g = grid();
    DistributionField f(static_cast<int>(g.size()), make_mesh(1.0, 16), Layout::cell_average);
    for (int j = 0; j < f.columns(); ++j) f.values.col(j) = (j % 2 ? 0.5 : 1.5) * g.sqrt_mu;
    CHECK(mean_value(g, f) == doctest::Approx(1.0));
}

TEST_CASE("norms of the equilibrium direction") {
    const VelocityGrid& g = grid();
    const MacroProjector P(g);
    const WallModel w = build_slab_wall(g, 1.0, 0.1, 0.0, 0.0);
    DistributionField f(static_cast<int>(g.size()), make_mesh(1.0, 16), Layout::dg_nodal);
    for (int j = 0; j < f.columns(); ++j) f.values.col(j) = g.sqrt_mu;
    const VelocityFunction nu = VelocityFunction::Ones(g.size());
    const NormBundle n = norms(g, P, nu, w, f);
    const double m = g.cell_volume() * g.mu.sum();
    CHECK(n.P_norm == doctest::Approx(std::sqrt(2.0 * m)));
    CHECK(n.norm == doctest::Approx(n.P_norm));
    CHECK(n.IP_nu_norm < 1e-12);
    CHECK(n.bdy_IPg_plus < 1e-12);
    CHECK(n.bdy_plus == doctest::Approx(std::sqrt(2.0 / w.faces[0].c_P)));
    CHECK(n.bdy_minus == doctest::Approx(n.bdy_plus));
    CHECK(n.weighted_sup == doctest::Approx(g.sqrt_mu.cwiseProduct(g.w).maxCoeff()));
}

TEST_CASE("energy tracker") {
    NormBundle b;
    b.norm = 2.0;
    b.P_norm = 1.0;
    b.IP_nu_norm = 0.1;
    b.bdy_plus = 0.5;
    b.bdy_minus = 0.5;
    b.bdy_IPg_plus = 0.2;
    const double eps = 0.1, alpha = 0.5;
    EnergyTracker t(0.0, eps, alpha);
    for (int k = 0; k <= 10; ++k) t.record(0.1 * k, b);
    const double integrand = 1.0 + 0.01 / (eps * eps) + alpha / eps * (0.04 + 0.5);
    CHECK(t.energy() == doctest::Approx(4.0));
    CHECK(t.dissipation() == doctest::Approx(integrand));

    // exponential weight, with and without the time derivative bundle
    EnergyTracker w(1.0, eps, alpha), wt(1.0, eps, alpha);
    w.record(0.0, b);
    w.record(1.0, b);
    wt.record(0.0, b, b);
    wt.record(1.0, b, b);
    CHECK(w.energy() == doctest::Approx(4.0 * std::exp(2.0)));
    CHECK(w.dissipation() == doctest::Approx(0.5 * integrand * (1 + std::exp(2.0))));
    CHECK(wt.dissipation() == doctest::Approx(2 * w.dissipation()));
}

TEST_CASE("csv writers agree with their headers") {
    std::ostringstream tr;
    write_trace_header(tr);
    write_trace_row(tr, TraceRow{});
    std::istringstream ti(tr.str());
    std::string h, r;
    std::getline(ti, h);
    std::getline(ti, r);
    CHECK(count_fields(h) == count_fields(r));

    const VelocityGrid& g = grid();
    const MacroFields m = extract_macro(MacroProjector(g), profile_field(g, Layout::cell_average));
    std::ostringstream mc;
    write_macro_csv(mc, m);
    std::istringstream mi(mc.str());
    std::getline(mi, h);
    CHECK(h == "x1,a,b1,b2,b3,c");
    int rows = 0;
    while (std::getline(mi, r)) {
        CHECK(count_fields(r) == 6);
        ++rows;
    }
    CHECK(rows == 16);
}

}
