#pragma once

#include "kinetic/velocity_space.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace kinetic {

using Field = std::function<Vec3(const Vec3&)>;

enum class DomainKind { slab, disk };

// Omega = {xi < 0}. The level set is xi0(s x) with xi0 the unit-scale form:
// slab xi0 = (x1^2 - H^2)/(2H), disk (cylinder along x3) xi0 = (x1^2 + x2^2 - R^2)/(2R).
// Stretching by eps multiplies s by eps, so xi_eps(y) = xi(eps y).
struct Domain {
    DomainKind kind = DomainKind::slab;
    double size = 1.0;
    double scale = 1.0;

    double level_set(const Vec3& x) const;
    Vec3 gradient(const Vec3& x) const;
    Eigen::Matrix3d hessian(const Vec3& x) const;
    Vec3 normal(const Vec3& x) const;
    bool inside(const Vec3& x) const { return level_set(x) <= 0.0; }
    // half-width or radius in the current coordinates
    double extent() const { return size / scale; }
    // point on the boundary at parameter phi (disk angle, or slab side sign(cos phi))
    Vec3 boundary_point(double phi) const;
    // max over boundary samples of the largest tangential Hessian eigenvalue of xi over 2|grad xi|,
    // with the Hessian taken by central differences
    double c_xi(int samples = 64) const;
};

Domain make_slab(double H);
Domain make_disk(double R);
Domain stretch(const Domain& d, double eps);

Vec3 specular_reflect(const Vec3& n, const Vec3& v);

enum class BounceType { specular, diffuse_branch };

struct Bounce {
    double t;
    Vec3 x;
    BounceType type;
};

struct TrajectoryState {
    double t = 0.0;
    Vec3 x = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    std::vector<Bounce> bounce_log;
    bool hit_boundary = false;
};

struct FlowOptions {
    double dt = 1e-2;
    long max_steps = 10'000'000;
    double crossing_tol = 1e-12;
};

// Backward flow x' = v, v' = eps^p Phi(x) from state.t down to s <= state.t. Stops at s or at the
// first crossing of xi = 0 (hit_boundary set, x on the boundary).
TrajectoryState flow(const Domain& d, const TrajectoryState& state, double s, double eps, const Field& phi, int p = 2,
                     const FlowOptions& opt = {});

struct ExitResult {
    bool found = false;
    double t_b = 0.0;
    Vec3 y_b = Vec3::Zero();
    Vec3 v_b = Vec3::Zero();
};

ExitResult exit_time(const Domain& d, const Vec3& x, const Vec3& v, double eps, const Field& phi, int p = 2,
                     double t_max = 1e6, const FlowOptions& opt = {});

struct CensusSample {
    Vec3 y;
    Vec3 v;
    bool boundary_start = false;
};

struct CensusReport {
    double eps = 0.0;
    double T0 = 0.0;
    std::size_t samples = 0;
    int max_bounces = 0;
    double min_interbounce = 0.0;  // infinity when no sample bounces twice
    double lemma_margin = 0.0;     // min over bounces of measured t_b / lower bound; infinity if none
    std::size_t lemma_checks = 0;
    std::vector<std::size_t> histogram;  // samples per bounce count
};

// Specular backward census in a stretched domain. domain is the unstretched one; eps the stretch.
CensusReport bounce_census(const Domain& domain, double eps, double T0, const std::vector<CensusSample>& samples,
                           const Field& phi = {}, const FlowOptions& opt = {});

// Interior starts uniform in the stretched domain with |v| <= v_cap; resampled while the first
// backward hit is grazing (|n.v| < eta). Boundary starts have n.v >= eta.
std::vector<CensusSample> census_interior_samples(const Domain& domain, double eps, std::size_t count, double v_cap,
                                                  double eta, std::mt19937_64& rng);
std::vector<CensusSample> census_boundary_samples(const Domain& domain, double eps, std::size_t count, double v_cap,
                                                  double eta, std::mt19937_64& rng);

// det dY(tau; s, y, v')/dv' by central differences; throws if a perturbed path reaches the boundary.
double flight_jacobian(const Domain& d, double eps, const Field& phi, int p, const Vec3& y, const Vec3& v, double s,
                       double tau, const FlowOptions& opt = {});

}  // namespace kinetic
