#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace kinetic {

using Vec3 = Eigen::Vector3d;
using VelocityFunction = Eigen::VectorXd;
using Polynomial = std::function<double(const Vec3&)>;

// Uniform cell-centred grid on [-v_max, v_max]^3. Node (i,j,k) sits at
// -v_max + (i + 1/2) h, so the node set is closed under every sign flip.
struct VelocityGrid {
    int n_per_axis = 0;
    double v_max = 0.0;
    double h = 0.0;
    double beta_prime = 0.0;
    std::vector<Vec3> nodes;
    VelocityFunction weights;
    VelocityFunction mu;
    VelocityFunction sqrt_mu;
    VelocityFunction w;

    std::size_t size() const { return nodes.size(); }
    int index(int i, int j, int k) const { return (i * n_per_axis + j) * n_per_axis + k; }
    std::array<int, 3> coords(int idx) const {
        const int n = n_per_axis;
        return {idx / (n * n), (idx / n) % n, idx % n};
    }
    // Node index of the image under the reflection that flips the axes set in mask (bit a = axis a).
    int reflect(int idx, unsigned mask) const;
    double cell_volume() const { return h * h * h; }
};

double maxwellian(const Vec3& v);
double bracket_v(const Vec3& v);

VelocityGrid build_grid(int n_per_axis, double v_max, double beta_prime = 0.01);

VelocityFunction evaluate(const VelocityGrid& grid, const Polynomial& p);

double moment(const VelocityGrid& grid, const VelocityFunction& f, const Polynomial& p);

// Sum over nodes with sign*(n.v) > 0 of weight * f * (n.v). Nodes with |n.v| < 1e-12 are skipped.
// For axis-aligned n the layers next to the plane n.v = 0 carry end-corrected weights.
double half_flux(const VelocityGrid& grid, const VelocityFunction& f, const Vec3& n, int sign);

// Per-node flux weight weight*(n.v) restricted to sign*(n.v) > 0, zero elsewhere.
VelocityFunction half_flux_weights(const VelocityGrid& grid, const Vec3& n, int sign);

}  // namespace kinetic
