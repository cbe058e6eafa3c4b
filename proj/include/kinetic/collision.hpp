#pragma once

#include "kinetic/velocity_space.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace kinetic {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Quadrature on S^2; nodes [0, M/2) are the upper hemisphere and node m + M/2 is exactly -node m.
struct SphereQuadrature {
    std::vector<Vec3> nodes;
    std::vector<double> weights;
    std::size_t size() const { return nodes.size(); }
    std::size_t half() const { return nodes.size() / 2; }
};

SphereQuadrature lat_long_sphere(int n_theta, int n_phi);

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

struct CollisionOptions {
    int n_theta = 4;
    int n_phi = 8;
    double partner_cut = 1e-14;          // partners u with mu(u)/mu(0) below this are skipped
    double max_exit_fraction = 1e-3;     // weighted fraction of dropped collisions tolerated
    std::size_t byte_budget = std::size_t(256) << 20;
    double tau_K = 1e-6;
    int linear_order = 2;                // interpolation order used for L and K (1 trilinear, 2 triquadratic)
    double pair_exponent = 20.0;         // bilinear paths skip pairs with |v|^2/4 + |u|^2/2 above this
};

// Post-collision geometry on the grid. For each (v, u, sigma) the pair v', u' is
// v' = (v+u)/2 + |v-u| sigma/2, u' = (v+u)/2 - |v-u| sigma/2, which equals the
// omega parametrisation with B = |(v-u).omega|; the Jacobian gives weight |v-u|/2 per unit sigma.
// Values at v', u' are trilinear interpolants of ratios F/mu. Post-collision points outside the
// hull of the nodes are clamped onto it.
class CollisionKernel {
public:
    CollisionKernel(const VelocityGrid& grid, const CollisionOptions& opt = {});

    const VelocityGrid& grid() const { return *grid_; }
    const SphereQuadrature& sphere() const { return sphere_; }
    const CollisionOptions& options() const { return opt_; }

    // G(v,u) = sum_sigma W(v,u,sigma); loss frequency nu_F(v) = (G F)(v).
    const Eigen::MatrixXd& frequency_matrix() const { return freq_; }
    // Same, restricted to the pairs kept by the bilinear paths.
    const Eigen::MatrixXd& pair_frequency_matrix() const { return freq_pair_; }
    // Weighted fraction of collisions with a post-collision point outside the grid.
    double exit_fraction() const { return exit_fraction_; }
    bool partner_active(int u) const { return active_[u] != 0; }

    // out(v,c) = sum_{u,sigma} W mu(u) Ia(v',c) Ib(u',c), summed over the full sphere, trilinear.
    // a, b, out are N x C row-major. When same is true, b is ignored and a is used twice.
    // With pair_cut the sum runs over the pairs of pair_frequency_matrix().
    void gain_ratio(const RowMatrix& a, const RowMatrix& b, RowMatrix& out, bool same, bool pair_cut = false) const;

    // A(v,w) in ratio variables: (L f)(v) = sqrt_mu(v) sum_w A(v,w) f(w)/sqrt_mu(w).
    Eigen::MatrixXd linearized_ratio_matrix() const;

    // Visit included collisions of node v: callback(u, W, p_plus[3], p_minus[3]) with points in index units.
    template <class F>
    void for_each_collision(int v, F&& fn, bool pair_cut = false) const;

private:
    const VelocityGrid* grid_;
    CollisionOptions opt_;
    SphereQuadrature sphere_;
    // Trilinear stencils of v' and u' per lattice difference k = v - u and half-sphere node, as offsets
    // from u in a buffer padded by ghost_ layers of constant extension (equivalent to clamping).
    struct PairGeometry {
        int op, om;
        double wp[8], wm[8];
        double W;
    };
    std::vector<PairGeometry> geometry_;
    int ghost_ = 0;
    Eigen::MatrixXd freq_;
    Eigen::MatrixXd freq_pair_;
    std::vector<char> active_;
    double exit_fraction_ = 0.0;
};

// Trilinear stencil of a point p in index units (0 <= p_a <= n-1).
struct Stencil {
    int base;
    double w[8];
};

inline bool inside_hull(const double* p, int n) {
    return p[0] >= 0.0 && p[0] <= n - 1 && p[1] >= 0.0 && p[1] <= n - 1 && p[2] >= 0.0 && p[2] <= n - 1;
}

inline Stencil make_stencil(const double* p, int n) {
    int b[3];
    double t[3];
    for (int a = 0; a < 3; ++a) {
        const double x = std::clamp(p[a], 0.0, double(n - 1));
        int f = static_cast<int>(x);
        if (f > n - 2) f = n - 2;
        b[a] = f;
        t[a] = x - f;
    }
    Stencil s;
    s.base = (b[0] * n + b[1]) * n + b[2];
    const double x0 = 1.0 - t[0], x1 = t[0], y0 = 1.0 - t[1], y1 = t[1], z0 = 1.0 - t[2], z1 = t[2];
    s.w[0] = x0 * y0 * z0;
    s.w[1] = x0 * y0 * z1;
    s.w[2] = x0 * y1 * z0;
    s.w[3] = x0 * y1 * z1;
    s.w[4] = x1 * y0 * z0;
    s.w[5] = x1 * y0 * z1;
    s.w[6] = x1 * y1 * z0;
    s.w[7] = x1 * y1 * z1;
    return s;
}

// Triquadratic Lagrange stencil on the three nodes nearest to p along each axis.
struct Stencil27 {
    int base;
    double w[27];
};

inline Stencil27 make_stencil27(const double* p, int n) {
    double wa[3][3];
    int b[3];
    for (int a = 0; a < 3; ++a) {
        const double x = std::clamp(p[a], 0.0, double(n - 1));
        int c = static_cast<int>(std::floor(x + 0.5));
        c = std::clamp(c, 1, n - 2);
        const double t = x - c;
        wa[a][0] = 0.5 * t * (t - 1.0);
        wa[a][1] = 1.0 - t * t;
        wa[a][2] = 0.5 * t * (t + 1.0);
        b[a] = c - 1;
    }
    Stencil27 s;
    s.base = (b[0] * n + b[1]) * n + b[2];
    int q = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) s.w[q++] = wa[0][i] * wa[1][j] * wa[2][k];
    return s;
}

inline void stencil_offsets27(int n, int off[27]) {
    int q = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) off[q++] = (i * n + j) * n + k;
}

inline void stencil_offsets(int n, int off[8]) {
    const int nn = n * n;
    off[0] = 0;
    off[1] = 1;
    off[2] = n;
    off[3] = n + 1;
    off[4] = nn;
    off[5] = nn + 1;
    off[6] = nn + n;
    off[7] = nn + n + 1;
}

template <class F>
void CollisionKernel::for_each_collision(int v, F&& fn, bool pair_cut) const {
    const VelocityGrid& g = *grid_;
    const auto ci = g.coords(v);
    const std::size_t M2 = sphere_.half();
    const double hvol = g.h * g.cell_volume();
    for (int u = 0; u < static_cast<int>(g.size()); ++u) {
        if (!active_[u] || u == v) continue;
        if (pair_cut && 0.25 * g.nodes[v].squaredNorm() + 0.5 * g.nodes[u].squaredNorm() > opt_.pair_exponent)
            continue;
        const auto cj = g.coords(u);
        const double k0 = ci[0] - cj[0], k1 = ci[1] - cj[1], k2 = ci[2] - cj[2];
        const double kn = std::sqrt(k0 * k0 + k1 * k1 + k2 * k2);
        const double m0 = 0.5 * (ci[0] + cj[0]), m1 = 0.5 * (ci[1] + cj[1]), m2 = 0.5 * (ci[2] + cj[2]);
        for (std::size_t s = 0; s < M2; ++s) {
            const Vec3& sg = sphere_.nodes[s];
            const double r = 0.5 * kn;
            const double pp[3] = {m0 + r * sg[0], m1 + r * sg[1], m2 + r * sg[2]};
            const double pm[3] = {m0 - r * sg[0], m1 - r * sg[1], m2 - r * sg[2]};
            fn(u, 0.5 * kn * hvol * sphere_.weights[s], pp, pm);
        }
    }
}

struct CollisionMatrices {
    VelocityFunction nu;
    Eigen::MatrixXd K;
    SphereQuadrature omega_nodes;
    Eigen::MatrixXd invariants;   // N x 5 orthonormal basis of the discrete null space
    double raw_asymmetry = 0.0;   // max |L - L^T| / max |L| before symmetrisation
    double raw_null_residual = 0.0;
    double exit_fraction = 0.0;
};

struct TransportCoefficients {
    double sigma = 0.0;
    double kappa = 0.0;
    int iterations_sigma = 0;
    int iterations_kappa = 0;
};

// The five invariants sqrt_mu, v_i sqrt_mu, (|v|^2-3)/2 sqrt_mu as columns.
Eigen::MatrixXd collision_invariants(const VelocityGrid& grid);

VelocityFunction q_full(const CollisionKernel& ker, const VelocityFunction& F, const VelocityFunction& G);

CollisionMatrices build_matrices(const CollisionKernel& ker);

VelocityFunction apply_L(const CollisionMatrices& mats, const VelocityFunction& f);

VelocityFunction apply_Gamma(const CollisionKernel& ker, const VelocityFunction& f, const VelocityFunction& g);

// Column-batched Gamma(f,g) for N x C fields; g == nullptr means Gamma(f,f).
RowMatrix gamma_batch(const CollisionKernel& ker, const RowMatrix& f, const RowMatrix* g);

// Gain part Q+(F,F) and loss frequency nu(F) for N x C absolute fields.
void gain_loss_batch(const CollisionKernel& ker, const RowMatrix& F, RowMatrix& gain, RowMatrix& nuF);

TransportCoefficients transport_coefficients(const CollisionMatrices& mats, const VelocityGrid& grid,
                                             double tol = 1e-10);

}  // namespace kinetic
