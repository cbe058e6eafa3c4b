#include "doctest.h"

#include "kinetic/geometry.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace kinetic;

TEST_SUITE("geometry_trajectory") {

TEST_CASE("level sets, normals and stretching") {
    const Domain slab = make_slab(2.0), disk = make_disk(1.5);
    CHECK(slab.level_set(Vec3(2, 7, -3)) == doctest::Approx(0.0));
    CHECK(slab.inside(Vec3(1.9, 100, 0)));
    CHECK_FALSE(slab.inside(Vec3(-2.1, 0, 0)));
    CHECK((slab.normal(Vec3(-2, 0, 0)) - Vec3(-1, 0, 0)).norm() < 1e-15);
    const Vec3 p = disk.boundary_point(0.7);
    CHECK(p.head<2>().norm() == doctest::Approx(1.5));
    CHECK((disk.normal(p) - p / 1.5).norm() < 1e-14);

    const Domain s = stretch(disk, 0.01);
    CHECK(s.extent() == doctest::Approx(150.0));
    const Vec3 y(80, -60, 3);
    CHECK(s.level_set(y) == doctest::Approx(disk.level_set(0.01 * y)));
    CHECK(s.inside(Vec3(149, 0, 0)));
    CHECK_THROWS_AS(stretch(disk, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_disk(-1.0), std::invalid_argument);
}

TEST_CASE("curvature constant") {
    CHECK(make_disk(1.0).c_xi() == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(make_disk(2.0).c_xi() == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(make_slab(1.0).c_xi() == doctest::Approx(0.0));
}

TEST_CASE("specular reflection") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 20; ++t) {
        Vec3 n(nd(rng), nd(rng), nd(rng)), v(nd(rng), nd(rng), nd(rng));
        n.normalize();
        const Vec3 r = specular_reflect(n, v);
        CHECK(r.norm() == doctest::Approx(v.norm()));
        CHECK(r.dot(n) == doctest::Approx(-v.dot(n)));
        CHECK((r - r.dot(n) * n - (v - v.dot(n) * n)).norm() < 1e-13);
        CHECK((specular_reflect(n, r) - v).norm() < 1e-13);
    }
}

TEST_CASE("free exit time matches the chord formula") {
    const Domain disk = make_disk(1.0);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ud(-0.6, 0.6);
    for (int t = 0; t < 20; ++t) {
        const Vec3 x(ud(rng), ud(rng), ud(rng)), v(3 * ud(rng), 3 * ud(rng), ud(rng));
        const double a = v.head<2>().squaredNorm(), b = x.head<2>().dot(v.head<2>()), c = x.head<2>().squaredNorm() - 1;
        const double tb = (b + std::sqrt(b * b - a * c)) / a;
        const ExitResult r = exit_time(disk, x, v, 1.0, {});
        REQUIRE(r.found);
        CHECK(r.t_b == doctest::Approx(tb).epsilon(1e-9));
        CHECK((r.y_b - (x - tb * v)).norm() < 1e-9);
    }
    const ExitResult none = exit_time(disk, Vec3(0, 0, 0), Vec3(0, 0, 1), 1.0, {});
    CHECK_FALSE(none.found);
}

TEST_CASE("backward flow in a harmonic field matches the closed form") {
    // x'' = -eps^2 x, omega = eps
    const double eps = 0.5, w = eps;
    const Domain big = make_slab(1e3);
    const Field phi = [](const Vec3& x) { return Vec3(-x); };
    const Vec3 x0(0.3, -0.2, 0.1), v0(1.0, 0.5, -0.7);
    TrajectoryState st;
    st.t = 0.0;
    st.x = x0;
    st.v = v0;
    FlowOptions opt;
    opt.dt = 1e-3;
    const double s = -3.0;
    const TrajectoryState e = flow(big, st, s, eps, phi, 2, opt);
    CHECK_FALSE(e.hit_boundary);
    const Vec3 xe = x0 * std::cos(w * s) + v0 / w * std::sin(w * s);
    const Vec3 ve = -x0 * w * std::sin(w * s) + v0 * std::cos(w * s);
    CHECK((e.x - xe).norm() < 1e-10);
    CHECK((e.v - ve).norm() < 1e-10);
    CHECK_THROWS_AS(flow(big, st, 1.0, eps, phi, 2, opt), std::invalid_argument);
}

TEST_CASE("flight jacobian") {
    const Domain big = make_slab(1e3);
    const Vec3 y(0.1, 0.2, 0.3), v(0.7, -0.4, 0.2);
    for (double tau : {-0.5, -2.0, -4.0}) {
        const double s = 1.0;
        CHECK(flight_jacobian(big, 1.0, {}, 2, y, v, s, tau) == doctest::Approx(std::pow(tau - s, 3)).epsilon(1e-6));
    }
    // harmonic field: dX/dv = sin(w (tau - s)) / w
    const double eps = 0.5, w = eps;
    FlowOptions opt;
    opt.dt = 1e-3;
    const Field phi = [](const Vec3& x) { return Vec3(-x); };
    const double J = flight_jacobian(big, eps, phi, 2, y, v, 0.0, -2.0, opt);
    CHECK(J == doctest::Approx(std::pow(std::sin(-2.0 * w) / w, 3)).epsilon(1e-6));
    CHECK_THROWS(flight_jacobian(make_slab(0.5), 1.0, {}, 2, Vec3::Zero(), Vec3(1, 0, 0), 0.0, -3.0));
}

TEST_CASE("bounce census in the stretched disk") {
    const Domain disk = make_disk(1.0);
    std::mt19937_64 rng(1);
    const double eps = 5e-4;
    const auto si = census_interior_samples(disk, eps, 200, 5.0, 0.1, rng);
    const auto sb = census_boundary_samples(disk, eps, 200, 5.0, 0.1, rng);
    REQUIRE(si.size() == 200);
    for (const auto& smp : sb) {
        const Domain sd = stretch(disk, eps);
        CHECK(sd.level_set(smp.y) == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(sd.normal(smp.y).dot(smp.v) >= 0.1 - 1e-12);
    }
    const CensusReport ri = bounce_census(disk, eps, 10.0, si);
    const CensusReport rb = bounce_census(disk, eps, 10.0, sb);
    CHECK(ri.max_bounces <= 1);
    CHECK(rb.max_bounces == 0);
    CHECK(ri.lemma_margin >= 1.0);
    std::size_t total = 0;
    for (std::size_t n : ri.histogram) total += n;
    CHECK(total == si.size());
}

TEST_CASE("census samples are reproducible") {
    const Domain disk = make_disk(1.0);
    std::mt19937_64 a(42), b(42);
    const auto sa = census_interior_samples(disk, 0.01, 50, 5.0, 0.1, a);
    const auto sb = census_interior_samples(disk, 0.01, 50, 5.0, 0.1, b);
    for (std::size_t i = 0; i < sa.size(); ++i) {
        CHECK(sa[i].y == sb[i].y);
        CHECK(sa[i].v == sb[i].v);
    }
}

}
