#include "kinetic/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace kinetic {

double Domain::level_set(const Vec3& x) const {
    const Vec3 z = scale * x;
    if (kind == DomainKind::slab) return (z[0] * z[0] - size * size) / (2.0 * size);
    return (z[0] * z[0] + z[1] * z[1] - size * size) / (2.0 * size);
}

Vec3 Domain::gradient(const Vec3& x) const {
    const Vec3 z = scale * x;
    if (kind == DomainKind::slab) return Vec3(scale * z[0] / size, 0.0, 0.0);
    return Vec3(scale * z[0] / size, scale * z[1] / size, 0.0);
}

Eigen::Matrix3d Domain::hessian(const Vec3&) const {
    Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
    const double c = scale * scale / size;
    H(0, 0) = c;
    if (kind == DomainKind::disk) H(1, 1) = c;
    return H;
}

Vec3 Domain::normal(const Vec3& x) const { return gradient(x).normalized(); }

Vec3 Domain::boundary_point(double phi) const {
    const double r = extent();
    if (kind == DomainKind::slab) return Vec3(std::cos(phi) >= 0.0 ? r : -r, 0.0, 0.0);
    return Vec3(r * std::cos(phi), r * std::sin(phi), 0.0);
}

double Domain::c_xi(int samples) const {
    const double hd = 1e-3 * extent();
    double best = 0.0;
    for (int k = 0; k < samples; ++k) {
        const Vec3 x = boundary_point(2.0 * std::numbers::pi * (k + 0.5) / samples);
        Eigen::Matrix3d H;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                Vec3 ea = Vec3::Zero(), eb = Vec3::Zero();
                ea[a] = hd;
                eb[b] = hd;
                H(a, b) = (level_set(x + ea + eb) - level_set(x + ea - eb) - level_set(x - ea + eb) +
                           level_set(x - ea - eb)) /
                          (4.0 * hd * hd);
            }
        const Vec3 g = gradient(x);
        const Vec3 n = g.normalized();
        const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - n * n.transpose();
        const Eigen::Matrix3d T = P * (0.5 * (H + H.transpose())) * P;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(T);
        best = std::max(best, es.eigenvalues().maxCoeff() / (2.0 * g.norm()));
    }
    return best;
}

Domain make_slab(double H) {
    if (!(H > 0.0)) throw std::invalid_argument("slab half-width must be positive");
    return Domain{DomainKind::slab, H, 1.0};
}

Domain make_disk(double R) {
    if (!(R > 0.0)) throw std::invalid_argument("disk radius must be positive");
    return Domain{DomainKind::disk, R, 1.0};
}

Domain stretch(const Domain& d, double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("stretch needs 0 < eps <= 1");
    Domain s = d;
    s.scale = d.scale * eps;
    return s;
}

Vec3 specular_reflect(const Vec3& n, const Vec3& v) { return v - 2.0 * n.dot(v) * n; }

namespace {

struct Phase {
    Vec3 x, v;
};

Phase rk4(const Phase& y, double h, double c, const Field& phi) {
    if (!phi) return {y.x + h * y.v, y.v};
    auto acc = [&](const Vec3& x) -> Vec3 { return c * phi(x); };
    const Vec3 k1x = y.v, k1v = acc(y.x);
    const Vec3 k2x = y.v + 0.5 * h * k1v, k2v = acc(y.x + 0.5 * h * k1x);
    const Vec3 k3x = y.v + 0.5 * h * k2v, k3v = acc(y.x + 0.5 * h * k2x);
    const Vec3 k4x = y.v + h * k3v, k4v = acc(y.x + h * k3x);
    return {y.x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x), y.v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)};
}

}  // namespace

TrajectoryState flow(const Domain& d, const TrajectoryState& state, double s, double eps, const Field& phi, int p,
                     const FlowOptions& opt) {
    if (s > state.t) throw std::invalid_argument("flow runs backward: need s <= t");
    const double c = std::pow(eps, p);
    const double tol = opt.crossing_tol * d.extent();
    TrajectoryState out = state;
    out.hit_boundary = false;
    Phase y{state.x, state.v};
    double t = state.t;
    long steps = 0;
    // without a field one step suffices: the domains are convex
    const double dt_max = phi ? opt.dt : std::numeric_limits<double>::infinity();
    while (t > s) {
        if (++steps > opt.max_steps) throw std::runtime_error("flow: step count overflow");
        const double h = -std::min(dt_max, t - s);
        const Phase next = rk4(y, h, c, phi);
        if (d.level_set(next.x) > tol) {
            double lo = 0.0, hi = 1.0;
            Phase best = y;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                const Phase pm = rk4(y, mid * h, c, phi);
                const double xi = d.level_set(pm.x);
                if (xi > tol) {
                    hi = mid;
                } else {
                    lo = mid;
                    best = pm;
                    if (xi >= -tol) break;
                }
                if (hi - lo < 1e-17) break;
            }
            out.t = t + lo * h;
            out.x = best.x;
            out.v = best.v;
            out.hit_boundary = true;
            return out;
        }
        y = next;
        t += h;
    }
    out.t = s;
    out.x = y.x;
    out.v = y.v;
    return out;
}

ExitResult exit_time(const Domain& d, const Vec3& x, const Vec3& v, double eps, const Field& phi, int p, double t_max,
                     const FlowOptions& opt) {
    TrajectoryState st;
    st.t = 0.0;
    st.x = x;
    st.v = v;
    const TrajectoryState end = flow(d, st, -t_max, eps, phi, p, opt);
    ExitResult r;
    if (!end.hit_boundary) return r;
    r.found = true;
    r.t_b = -end.t;
    r.y_b = end.x;
    r.v_b = end.v;
    return r;
}

CensusReport bounce_census(const Domain& domain, double eps, double T0, const std::vector<CensusSample>& samples,
                           const Field& phi, const FlowOptions& opt) {
    const Domain sd = stretch(domain, eps);
    const double cxi = domain.c_xi();
    const double inf = std::numeric_limits<double>::infinity();
    CensusReport rep;
    rep.eps = eps;
    rep.T0 = T0;
    rep.samples = samples.size();
    rep.min_interbounce = inf;
    rep.lemma_margin = inf;
    const double t_far = 1e3 * sd.extent();
    for (const CensusSample& smp : samples) {
        TrajectoryState st;
        st.t = T0;
        st.x = smp.y;
        st.v = smp.v;
        int bounces = 0;
        double last = inf;
        while (true) {
            st = flow(sd, st, 0.0, eps, phi, 3, opt);
            if (!st.hit_boundary) break;
            ++bounces;
            st.bounce_log.push_back({st.t, st.x, BounceType::specular});
            if (last < inf) rep.min_interbounce = std::min(rep.min_interbounce, last - st.t);
            last = st.t;
            const Vec3 n = sd.normal(st.x);
            const Vec3 vin = st.v;
            st.v = specular_reflect(n, vin);
            if (cxi > 0.0) {
                const ExitResult nx = exit_time(sd, st.x, st.v, eps, phi, 3, t_far, opt);
                if (nx.found) {
                    const double bound = std::abs(vin.dot(n)) / (eps * 64.0 * cxi * vin.squaredNorm());
                    rep.lemma_margin = std::min(rep.lemma_margin, nx.t_b / bound);
                    ++rep.lemma_checks;
                }
            }
            if (st.t <= 0.0) break;
        }
        rep.max_bounces = std::max(rep.max_bounces, bounces);
        if (rep.histogram.size() <= static_cast<std::size_t>(bounces)) rep.histogram.resize(bounces + 1, 0);
        ++rep.histogram[bounces];
    }
    return rep;
}

namespace {

Vec3 uniform_ball(double r, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    while (true) {
        const Vec3 v(U(rng), U(rng), U(rng));
        if (v.squaredNorm() <= 1.0) return r * v;
    }
}

Vec3 uniform_interior(const Domain& sd, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const double r = sd.extent();
    if (sd.kind == DomainKind::slab) return Vec3(r * U(rng), 0.0, 0.0);
    while (true) {
        const double a = U(rng), b = U(rng);
        if (a * a + b * b <= 1.0) return Vec3(r * a, r * b, 0.0);
    }
}

}  // namespace

std::vector<CensusSample> census_interior_samples(const Domain& domain, double eps, std::size_t count, double v_cap,
                                                  double eta, std::mt19937_64& rng) {
    const Domain sd = stretch(domain, eps);
    std::vector<CensusSample> out;
    out.reserve(count);
    const double t_far = 1e3 * sd.extent();
    while (out.size() < count) {
        CensusSample s{uniform_interior(sd, rng), uniform_ball(v_cap, rng), false};
        const ExitResult ex = exit_time(sd, s.y, s.v, eps, {}, 3, t_far);
        if (ex.found && std::abs(sd.normal(ex.y_b).dot(ex.v_b)) < eta) continue;
        out.push_back(s);
    }
    return out;
}

std::vector<CensusSample> census_boundary_samples(const Domain& domain, double eps, std::size_t count, double v_cap,
                                                  double eta, std::mt19937_64& rng) {
    const Domain sd = stretch(domain, eps);
    std::uniform_real_distribution<double> U(0.0, 2.0 * std::numbers::pi);
    std::vector<CensusSample> out;
    out.reserve(count);
    while (out.size() < count) {
        const Vec3 y = sd.boundary_point(U(rng));
        const Vec3 v = uniform_ball(v_cap, rng);
        if (sd.normal(y).dot(v) < eta) continue;
        out.push_back({y, v, true});
    }
    return out;
}

double flight_jacobian(const Domain& d, double eps, const Field& phi, int p, const Vec3& y, const Vec3& v, double s,
                       double tau, const FlowOptions& opt) {
    if (!(tau < s)) throw std::invalid_argument("flight_jacobian needs tau < s");
    const double dv = 1e-5 * std::max(1.0, v.norm());
    auto end = [&](const Vec3& w) {
        TrajectoryState st;
        st.t = s;
        st.x = y;
        st.v = w;
        const TrajectoryState e = flow(d, st, tau, eps, phi, p, opt);
        if (e.hit_boundary) throw std::runtime_error("flight_jacobian: perturbed trajectory reaches the boundary");
        return e.x;
    };
    Eigen::Matrix3d J;
    for (int a = 0; a < 3; ++a) {
        Vec3 e = Vec3::Zero();
        e[a] = dv;
        J.col(a) = (end(v + e) - end(v - e)) / (2.0 * dv);
    }
    return J.determinant();
}

}  // namespace kinetic
