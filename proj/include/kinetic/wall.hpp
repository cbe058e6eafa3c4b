#pragma once

#include "kinetic/velocity_space.hpp"

#include <vector>

namespace kinetic {

// Which |n.v| weights the wall flux sums use: the end-corrected half_flux quadrature, or the
// plain h^3 |n.v| that the transport scheme's flux balance sees.
enum class FluxWeights { quadrature, transport };

struct WallFace {
    Vec3 normal;           // unit outward normal
    double theta_w = 0.0;  // wall temperature fluctuation, T_w = 1 + eps theta_w
    std::vector<int> incoming, outgoing;
    std::vector<int> reflect;    // node -> node of v - 2(n.v)n
    VelocityFunction flux;       // |n.v| weight per node, 0 on grazing nodes
    VelocityFunction wall_maxwellian;  // M^w scaled so that sum_in M^w flux = 1
    double c_P = 0.0;            // 1 / sum_out mu flux, the discrete sqrt(2 pi)
};

struct WallModel {
    double alpha = 1.0;
    double eps = 0.1;
    std::vector<WallFace> faces;
};

// Wall Maxwellian M_{1,0,T} up to normalization; T = 1 + eps theta_w.
double wall_temperature_maxwellian(const Vec3& v, double T);

// Closed form sqrt(2 pi / T) M_{1,0,T}.
double wall_maxwellian_exact(const Vec3& v, double T);

// Precomputes one face. The normal must map grid nodes onto grid nodes under reflection
// (axis-aligned normals on the symmetric grid).
WallFace build_face(const VelocityGrid& grid, const Vec3& normal, double theta_w, double eps,
                    FluxWeights weights = FluxWeights::quadrature);

WallModel build_slab_wall(const VelocityGrid& grid, double alpha, double eps, double theta_minus, double theta_plus,
                          FluxWeights weights = FluxWeights::quadrature);

// sum over outgoing nodes of flux * g
double outgoing_flux(const WallFace& face, const VelocityFunction& g);
double incoming_flux(const WallFace& face, const VelocityFunction& g);

// Absolute form: incoming entries of F replaced by (1-alpha) F(Rv) + alpha M^w sum_out F flux.
VelocityFunction apply_maxwell_bc_absolute(const WallModel& wall, int face, const VelocityFunction& F);

// Fluctuation form of the linear part: incoming entries replaced by (1-alpha) f(Rv) + alpha P_gamma f.
VelocityFunction apply_maxwell_bc_linear(const VelocityGrid& grid, const WallModel& wall, int face,
                                          const VelocityFunction& f);

// c_P sqrt(mu(v)) sum_out f sqrt(mu) flux, at every node.
VelocityFunction apply_P_gamma(const VelocityGrid& grid, const WallFace& face, const VelocityFunction& f);

// eps^{-1} [ mu^{-1/2} P^w(sqrt(mu) f) - P_gamma f ], at every node.
VelocityFunction apply_Q1(const VelocityGrid& grid, const WallFace& face, const VelocityFunction& f, double eps);

// eps [ phi - mu^{-1/2} P^w(sqrt(mu) phi) ], at every node.
VelocityFunction apply_Q2(const VelocityGrid& grid, const WallFace& face, const VelocityFunction& phi, double eps);

struct ExpansionReport {
    double residual = 0.0;  // max over nodes of |M^w - sqrt(2pi) mu - eps theta sqrt(2pi)(|v|^2/2-2) mu| / (<v>^4 mu)
};

ExpansionReport expand_wall_maxwellian(const VelocityGrid& grid, double theta_w, double eps);

// f_w = sqrt(mu) [Theta_w (|v|^2-3)/2 + rho_w] at one point, rho_w = -Theta_w + mean(Theta_w).
VelocityFunction build_fw(const VelocityGrid& grid, double Theta_w, double mean_Theta);

// phi_eps = (M_{1+eps rho, 0, 1+eps Theta} - mu - eps f_w sqrt(mu)) / (eps^2 sqrt(mu)).
VelocityFunction build_phi_eps(const VelocityGrid& grid, double Theta_w, double mean_Theta, double eps);

}  // namespace kinetic
