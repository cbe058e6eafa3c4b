#include "kinetic/wall.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace kinetic {

double wall_temperature_maxwellian(const Vec3& v, double T) {
    return std::pow(2.0 * std::numbers::pi * T, -1.5) * std::exp(-0.5 * v.squaredNorm() / T);
}

double wall_maxwellian_exact(const Vec3& v, double T) {
    return std::sqrt(2.0 * std::numbers::pi / T) * wall_temperature_maxwellian(v, T);
}

namespace {

int reflected_node(const VelocityGrid& grid, const Vec3& n, int idx) {
    unsigned mask = 0;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(std::abs(n[a]) - 1.0) < 1e-12) mask |= 1u << a;
        else if (std::abs(n[a]) > 1e-12)
            throw std::invalid_argument("wall normal must be axis-aligned for the grid reflection map");
    }
    return grid.reflect(idx, mask);
}

}  // namespace

WallFace build_face(const VelocityGrid& grid, const Vec3& normal, double theta_w, double eps, FluxWeights weights) {
    WallFace f;
    f.normal = normal.normalized();
    f.theta_w = theta_w;
    const int N = static_cast<int>(grid.size());
    f.reflect.resize(N);
    if (weights == FluxWeights::quadrature) {
        f.flux = half_flux_weights(grid, f.normal, 1) - half_flux_weights(grid, f.normal, -1);
    } else {
        f.flux.resize(N);
        for (int i = 0; i < N; ++i) {
            const double nv = f.normal.dot(grid.nodes[i]);
            f.flux[i] = std::abs(nv) < 1e-12 ? 0.0 : grid.weights[i] * std::abs(nv);
        }
    }
    for (int i = 0; i < N; ++i) {
        f.reflect[i] = reflected_node(grid, f.normal, i);
        const double nv = f.normal.dot(grid.nodes[i]);
        if (f.flux[i] == 0.0) continue;
        (nv > 0.0 ? f.outgoing : f.incoming).push_back(i);
    }
    const double T = 1.0 + eps * theta_w;
    if (!(T > 0.0)) throw std::invalid_argument("wall temperature must stay positive");
    f.wall_maxwellian.resize(N);
    for (int i = 0; i < N; ++i) f.wall_maxwellian[i] = wall_temperature_maxwellian(grid.nodes[i], T);
    double s = 0.0;
    for (int i : f.incoming) s += f.wall_maxwellian[i] * f.flux[i];
    f.wall_maxwellian /= s;
    double m = 0.0;
    for (int i : f.outgoing) m += grid.mu[i] * f.flux[i];
    f.c_P = 1.0 / m;
    return f;
}

WallModel build_slab_wall(const VelocityGrid& grid, double alpha, double eps, double theta_minus, double theta_plus,
                          FluxWeights weights) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("accommodation must lie in [0,1]");
    WallModel w;
    w.alpha = alpha;
    w.eps = eps;
    w.faces.push_back(build_face(grid, Vec3(-1, 0, 0), theta_minus, eps, weights));
    w.faces.push_back(build_face(grid, Vec3(1, 0, 0), theta_plus, eps, weights));
    return w;
}

double outgoing_flux(const WallFace& face, const VelocityFunction& g) {
    double s = 0.0;
    for (int i : face.outgoing) s += g[i] * face.flux[i];
    return s;
}

double incoming_flux(const WallFace& face, const VelocityFunction& g) {
    double s = 0.0;
    for (int i : face.incoming) s += g[i] * face.flux[i];
    return s;
}

VelocityFunction apply_maxwell_bc_absolute(const WallModel& wall, int face, const VelocityFunction& F) {
    const WallFace& fc = wall.faces.at(face);
    const double out = outgoing_flux(fc, F);
    VelocityFunction r = F;
    for (int i : fc.incoming) r[i] = (1.0 - wall.alpha) * F[fc.reflect[i]] + wall.alpha * fc.wall_maxwellian[i] * out;
    return r;
}

VelocityFunction apply_P_gamma(const VelocityGrid& grid, const WallFace& face, const VelocityFunction& f) {
    const double s = outgoing_flux(face, f.cwiseProduct(grid.sqrt_mu));
    return face.c_P * s * grid.sqrt_mu;
}

VelocityFunction apply_maxwell_bc_linear(const VelocityGrid& grid, const WallModel& wall, int face,
                                          const VelocityFunction& f) {
    const WallFace& fc = wall.faces.at(face);
    const VelocityFunction P = apply_P_gamma(grid, fc, f);
    VelocityFunction r = f;
    for (int i : fc.incoming) r[i] = (1.0 - wall.alpha) * f[fc.reflect[i]] + wall.alpha * P[i];
    return r;
}

VelocityFunction apply_Q1(const VelocityGrid& grid, const WallFace& face, const VelocityFunction& f, double eps) {
    const double s = outgoing_flux(face, f.cwiseProduct(grid.sqrt_mu));
    VelocityFunction r(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        r[i] = (face.wall_maxwellian[i] / grid.sqrt_mu[i] - face.c_P * grid.sqrt_mu[i]) * s / eps;
    return r;
}

VelocityFunction apply_Q2(const VelocityGrid& grid, const WallFace& face, const VelocityFunction& phi, double eps) {
    const double s = outgoing_flux(face, phi.cwiseProduct(grid.sqrt_mu));
    VelocityFunction r(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) r[i] = eps * (phi[i] - face.wall_maxwellian[i] / grid.sqrt_mu[i] * s);
    return r;
}

ExpansionReport expand_wall_maxwellian(const VelocityGrid& grid, double theta_w, double eps) {
    const double T = 1.0 + eps * theta_w;
    const double s2pi = std::sqrt(2.0 * std::numbers::pi);
    ExpansionReport rep;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec3& v = grid.nodes[i];
        const double mu = grid.mu[i];
        const double lead = s2pi * mu + eps * theta_w * s2pi * (0.5 * v.squaredNorm() - 2.0) * mu;
        const double b = bracket_v(v);
        rep.residual = std::max(rep.residual, std::abs(wall_maxwellian_exact(v, T) - lead) / (b * b * b * b * mu));
    }
    return rep;
}

VelocityFunction build_fw(const VelocityGrid& grid, double Theta_w, double mean_Theta) {
    const double rho = -Theta_w + mean_Theta;
    VelocityFunction f(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        f[i] = grid.sqrt_mu[i] * (Theta_w * 0.5 * (grid.nodes[i].squaredNorm() - 3.0) + rho);
    return f;
}

VelocityFunction build_phi_eps(const VelocityGrid& grid, double Theta_w, double mean_Theta, double eps) {
    const double rho = -Theta_w + mean_Theta;
    const double T = 1.0 + eps * Theta_w;
    const VelocityFunction fw = build_fw(grid, Theta_w, mean_Theta);
    VelocityFunction phi(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double M = (1.0 + eps * rho) * wall_temperature_maxwellian(grid.nodes[i], T);
        phi[i] = (M - grid.mu[i] - eps * fw[i] * grid.sqrt_mu[i]) / (eps * eps * grid.sqrt_mu[i]);
    }
    return phi;
}

}  // namespace kinetic
