#include "kinetic/velocity_space.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace kinetic {

namespace {
constexpr double kGrazing = 1e-12;
}

double maxwellian(const Vec3& v) {
    return std::pow(2.0 * std::numbers::pi, -1.5) * std::exp(-0.5 * v.squaredNorm());
}

double bracket_v(const Vec3& v) { return std::sqrt(1.0 + v.squaredNorm()); }

int VelocityGrid::reflect(int idx, unsigned mask) const {
    auto c = coords(idx);
    for (int a = 0; a < 3; ++a)
        if (mask & (1u << a)) c[a] = n_per_axis - 1 - c[a];
    return index(c[0], c[1], c[2]);
}

VelocityGrid build_grid(int n_per_axis, double v_max, double beta_prime) {
    if (n_per_axis < 8 || n_per_axis % 2 != 0)
        throw std::invalid_argument("n_per_axis must be even and >= 8, got " + std::to_string(n_per_axis));
    if (!(v_max >= 5.0))
        throw std::invalid_argument("v_max must be >= 5 to keep the Maxwellian tail below 1e-6");
    if (!(beta_prime > 0.0 && beta_prime < 0.25))
        throw std::invalid_argument("beta_prime must lie in (0, 1/4)");

    VelocityGrid g;
    g.n_per_axis = n_per_axis;
    g.v_max = v_max;
    g.h = 2.0 * v_max / n_per_axis;
    g.beta_prime = beta_prime;

    const int n = n_per_axis;
    const std::size_t N = static_cast<std::size_t>(n) * n * n;
    g.nodes.resize(N);
    g.weights.resize(N);
    g.mu.resize(N);
    g.sqrt_mu.resize(N);
    g.w.resize(N);

    std::vector<double> axis(n);
    for (int i = 0; i < n; ++i) axis[i] = -v_max + (i + 0.5) * g.h;

    const double vol = g.cell_volume();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const int idx = g.index(i, j, k);
                Vec3 v(axis[i], axis[j], axis[k]);
                g.nodes[idx] = v;
                g.weights[idx] = vol;
                g.mu[idx] = maxwellian(v);
                g.sqrt_mu[idx] = std::sqrt(g.mu[idx]);
                g.w[idx] = std::exp(beta_prime * v.squaredNorm());
            }
    return g;
}

VelocityFunction evaluate(const VelocityGrid& grid, const Polynomial& p) {
    VelocityFunction out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = p(grid.nodes[i]);
    return out;
}

double moment(const VelocityGrid& grid, const VelocityFunction& f, const Polynomial& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) s += grid.weights[i] * f[i] * p(grid.nodes[i]);
    return s;
}

VelocityFunction half_flux_weights(const VelocityGrid& grid, const Vec3& n, int sign) {
    VelocityFunction out = VelocityFunction::Zero(grid.size());
    int axis = -1;
    for (int a = 0; a < 3; ++a)
        if (std::abs(std::abs(n[a]) - 1.0) < 1e-14) axis = a;
    if (axis < 0) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double nv = n.dot(grid.nodes[i]);
            if (std::abs(nv) < kGrazing) continue;
            if (sign * nv > 0.0) out[i] = grid.weights[i] * nv;
        }
        return out;
    }
    // Axis-aligned normal: the integrand |n.v| F has a kink at n.v = 0, which costs the plain
    // midpoint rule O(h^2). The layers nearest the plane get corrected weights that make the
    // 1D half-line rule exact for x^j exp(-x^2/2), j < L.
    const double h = grid.h;
    const int m = grid.n_per_axis / 2;
    const int L = m >= 6 ? 3 : 2;
    Eigen::MatrixXd A(L, L);
    Eigen::VectorXd rhs(L);
    for (int j = 0; j < L; ++j) {
        double s = 0.0;
        for (int l = 0; l < m; ++l) {
            const double x = (l + 0.5) * h;
            s += h * std::pow(x, j + 1) * std::exp(-0.5 * x * x);
        }
        rhs[j] = std::pow(2.0, 0.5 * j) * std::tgamma(0.5 * j + 1.0) - s;
        for (int l = 0; l < L; ++l) {
            const double x = (l + 0.5) * h;
            A(j, l) = std::pow(x, j) * std::exp(-0.5 * x * x);
        }
    }
    const Eigen::VectorXd delta = A.partialPivLu().solve(rhs);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double nv = n.dot(grid.nodes[i]);
        if (sign * nv <= 0.0) continue;
        const int layer = static_cast<int>(std::lround(std::abs(nv) / h - 0.5));
        double w = h * std::abs(nv);
        if (layer < L) w += delta[layer];
        out[i] = h * h * w * (nv > 0.0 ? 1.0 : -1.0);
    }
    return out;
}

double half_flux(const VelocityGrid& grid, const VelocityFunction& f, const Vec3& n, int sign) {
    return half_flux_weights(grid, n, sign).dot(f);
}

}  // namespace kinetic
