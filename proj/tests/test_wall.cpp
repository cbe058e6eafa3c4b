#include "doctest.h"

#include "kinetic/diagnostics.hpp"
#include "kinetic/wall.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace kinetic;

namespace {

const VelocityGrid& grid() {
    static const VelocityGrid g = build_grid(12, 6.0);
    return g;
}

VelocityFunction random_positive(const VelocityGrid& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ud(0.2, 1.8);
    VelocityFunction F(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) F[i] = g.mu[i] * ud(rng);
    return F;
}

}  // namespace

TEST_SUITE("wall_boundary") {

TEST_CASE("faces split the grid by the sign of n.v") {
    const VelocityGrid& g = grid();
    const WallFace f = build_face(g, Vec3(1, 0, 0), 0.0, 0.1);
    CHECK(f.incoming.size() == g.size() / 2);
    CHECK(f.outgoing.size() == g.size() / 2);
    for (int i : f.incoming) {
        CHECK(g.nodes[i][0] < 0);
        CHECK(g.nodes[f.reflect[i]][0] == doctest::Approx(-g.nodes[i][0]));
        CHECK(g.nodes[f.reflect[i]][1] == g.nodes[i][1]);
    }
    CHECK_THROWS_AS(build_face(g, Vec3(1, 1, 0).normalized(), 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("discrete normalisations") {
    const VelocityGrid& g = grid();
    for (FluxWeights fw : {FluxWeights::quadrature, FluxWeights::transport}) {
        const WallModel w = build_slab_wall(g, 1.0, 0.1, -0.3, 0.4, fw);
        REQUIRE(w.faces.size() == 2);
        CHECK(w.faces[0].normal[0] == -1.0);
        CHECK(w.faces[1].normal[0] == 1.0);
        for (const WallFace& f : w.faces) {
            CHECK(incoming_flux(f, f.wall_maxwellian) == doctest::Approx(1.0).epsilon(1e-13));
            CHECK(f.c_P * outgoing_flux(f, g.mu) == doctest::Approx(1.0).epsilon(1e-13));
        }
    }
    const WallFace q = build_face(g, Vec3(1, 0, 0), 0.0, 0.1);
    CHECK(q.c_P == doctest::Approx(std::sqrt(2 * std::numbers::pi)).epsilon(1e-6));
}

TEST_CASE("closed-form wall maxwellian has unit incoming flux") {
    const VelocityGrid g = build_grid(16, 6.0);
    for (double T : {0.9, 1.0, 1.2}) {
        const VelocityFunction M = evaluate(g, [&](const Vec3& v) { return wall_maxwellian_exact(v, T); });
        CHECK(-half_flux(g, M, Vec3(1, 0, 0), -1) == doctest::Approx(1.0).epsilon(1e-3));
    }
    CHECK(wall_maxwellian_exact(Vec3::Zero(), 1.0) == doctest::Approx(std::sqrt(2 * std::numbers::pi) * maxwellian(Vec3::Zero())));
}

TEST_CASE("maxwell condition conserves mass flux") {
    const VelocityGrid& g = grid();
    std::mt19937_64 rng(2);
    for (double alpha : {0.0, 0.3, 1.0}) {
        const WallModel w = build_slab_wall(g, alpha, 0.1, -0.05, 0.05);
        for (int face = 0; face < 2; ++face)
            for (int t = 0; t < 20; ++t) {
                const VelocityFunction F = random_positive(g, rng);
                const VelocityFunction G = apply_maxwell_bc_absolute(w, face, F);
                const WallFace& fc = w.faces[face];
                CHECK(incoming_flux(fc, G) == doctest::Approx(outgoing_flux(fc, G)).epsilon(1e-12));
                for (int i : fc.outgoing) CHECK(G[i] == F[i]);
            }
    }
}

TEST_CASE("specular and diffuse limits") {
    const VelocityGrid& g = grid();
    std::mt19937_64 rng(4);
    const VelocityFunction F = random_positive(g, rng);
    const WallModel spec = build_slab_wall(g, 0.0, 0.1, 0.0, 0.0);
    const VelocityFunction S = apply_maxwell_bc_absolute(spec, 1, F);
    for (int i : spec.faces[1].incoming) CHECK(S[i] == F[spec.faces[1].reflect[i]]);
    // a diffuse wall at T = 1 returns mu times the outgoing flux ratio
    const WallModel diff = build_slab_wall(g, 1.0, 0.1, 0.0, 0.0);
    const VelocityFunction D = apply_maxwell_bc_absolute(diff, 0, g.mu);
    for (int i : diff.faces[0].incoming) CHECK(D[i] == doctest::Approx(g.mu[i]).epsilon(1e-12));
}

TEST_CASE("P_gamma is a projection fixing sqrt(mu)") {
    const VelocityGrid& g = grid();
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd;
    const WallModel w = build_slab_wall(g, 1.0, 0.1, -0.05, 0.05);
    for (const WallFace& f : w.faces) {
        const VelocityFunction s = apply_P_gamma(g, f, g.sqrt_mu);
        CHECK((s - g.sqrt_mu).cwiseAbs().maxCoeff() < 1e-14);
        VelocityFunction h(g.size());
        for (auto& x : h) x = nd(rng);
        const VelocityFunction p = apply_P_gamma(g, f, h);
        CHECK((apply_P_gamma(g, f, p) - p).cwiseAbs().maxCoeff() <= 1e-13 * p.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("boundary remainders carry no incoming mass flux") {
    const VelocityGrid& g = grid();
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    for (double th : {-0.5, 0.0, 0.7}) {
        const WallFace f = build_face(g, Vec3(-1, 0, 0), th, 0.1);
        VelocityFunction h(g.size());
        for (auto& x : h) x = nd(rng);
        auto flux = [&](const VelocityFunction& r) { return incoming_flux(f, r.cwiseProduct(g.sqrt_mu)); };
        const VelocityFunction q1 = apply_Q1(g, f, h, 0.1);
        CHECK(std::abs(flux(q1)) < 1e-12 * incoming_flux(f, (h.cwiseProduct(g.sqrt_mu)).cwiseAbs()) / 0.1);
        const VelocityFunction phi = build_phi_eps(g, th, 0.1, 0.1);
        const VelocityFunction q2 = apply_Q2(g, f, phi, 0.1);
        CHECK(std::abs(flux(q2)) < 1e-12 * incoming_flux(f, (phi.cwiseProduct(g.sqrt_mu)).cwiseAbs()));
    }
    // isothermal wall: the diffuse operator is P_gamma, so Q1 vanishes
    const WallFace f0 = build_face(g, Vec3(1, 0, 0), 0.0, 0.1);
    VelocityFunction h(g.size());
    for (auto& x : h) x = nd(rng);
    CHECK(apply_Q1(g, f0, h, 0.1).cwiseAbs().maxCoeff() < 1e-10 * h.cwiseAbs().maxCoeff());
}

TEST_CASE("wall maxwellian expansion is second order") {
    const VelocityGrid g = build_grid(16, 6.0);
    const double r1 = expand_wall_maxwellian(g, 0.1, 0.2).residual;
    const double r2 = expand_wall_maxwellian(g, 0.1, 0.1).residual;
    const double r3 = expand_wall_maxwellian(g, 0.1, 0.05).residual;
    CHECK(std::log2(r1 / r2) == doctest::Approx(2.0).epsilon(0.1));
    CHECK(std::log2(r2 / r3) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("f_w carries the wall density and temperature") {
    const VelocityGrid& g = grid();
    const MacroProjector P(g);
    const auto c = P.coefficients(build_fw(g, 0.3, 0.1));
    CHECK(c[0] == doctest::Approx(-0.2));
    CHECK(c[1] == doctest::Approx(0.0));
    CHECK(c[4] == doctest::Approx(0.3));
}

TEST_CASE("phi_eps converges as eps shrinks") {
    const VelocityGrid& g = grid();
    const VelocityFunction a = build_phi_eps(g, 0.4, 0.1, 0.1);
    const VelocityFunction b = build_phi_eps(g, 0.4, 0.1, 0.05);
    const VelocityFunction c = build_phi_eps(g, 0.4, 0.1, 0.025);
    const double d1 = (a - b).norm(), d2 = (b - c).norm();
    CHECK(b.norm() > 0.0);
    CHECK(d2 < 0.6 * d1);
}

}
