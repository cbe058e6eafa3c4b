#pragma once

#include "kinetic/field.hpp"
#include "kinetic/velocity_space.hpp"
#include "kinetic/wall.hpp"

#include <array>
#include <optional>
#include <ostream>
#include <vector>

namespace kinetic {

struct CollisionMatrices;

// Orthogonal projection onto span{sqrt_mu, v sqrt_mu, (|v|^2-3)/2 sqrt_mu} in the
// discrete inner product, through the 5x5 Gram matrix.
class MacroProjector {
public:
    explicit MacroProjector(const VelocityGrid& grid);

    // (a, b1, b2, b3, c)
    Eigen::Matrix<double, 5, 1> coefficients(const VelocityFunction& f) const;
    VelocityFunction P(const VelocityFunction& f) const;
    VelocityFunction I_minus_P(const VelocityFunction& f) const { return f - P(f); }
    Eigen::MatrixXd P_columns(const Eigen::MatrixXd& f) const;
    const Eigen::MatrixXd& basis() const { return basis_; }

private:
    const VelocityGrid* grid_;
    Eigen::MatrixXd basis_;
    Eigen::MatrixXd weighted_basis_;  // h^3 * basis
    Eigen::LLT<Eigen::Matrix<double, 5, 5>> gram_;
};

struct MacroFields {
    Layout layout = Layout::cell_average;
    double dx = 0.0;
    std::vector<double> x;
    std::vector<double> a, c;
    std::vector<std::array<double, 3>> b;
    std::size_t size() const { return x.size(); }
};

MacroFields extract_macro(const MacroProjector& proj, const DistributionField& f);

// <f> = sum f sqrt_mu / sum mu over the whole channel
double mean_value(const VelocityGrid& grid, const DistributionField& f);

struct NormBundle {
    double P_norm = 0.0;        // ||P f||_2
    double IP_nu_norm = 0.0;    // ||(I-P) f||_nu
    double norm = 0.0;          // ||f||_2
    double bdy_plus = 0.0;      // |f|_{2,+}
    double bdy_minus = 0.0;     // |f|_{2,-}
    double bdy_IPg_plus = 0.0;  // |(1-P_gamma) f|_{2,+}
    double weighted_sup = 0.0;  // ||w f||_inf
};

// Wall faces: wall.faces[0] sits at x1 = -H, wall.faces[1] at x1 = +H.
NormBundle norms(const VelocityGrid& grid, const MacroProjector& proj, const VelocityFunction& nu,
                 const WallModel& wall, const DistributionField& f);

// Running sup / running time integral of the energy and dissipation functionals.
class EnergyTracker {
public:
    EnergyTracker(double lambda, double eps, double alpha) : lambda_(lambda), eps_(eps), alpha_(alpha) {}

    // ft: the time derivative bundle, if available
    void record(double t, const NormBundle& f, const std::optional<NormBundle>& ft = std::nullopt);
    double energy() const { return energy_; }
    double dissipation() const { return dissipation_; }

private:
    double integrand(double t, const NormBundle& f, const std::optional<NormBundle>& ft) const;
    double lambda_, eps_, alpha_;
    double energy_ = 0.0;
    double dissipation_ = 0.0;
    bool started_ = false;
    double last_t_ = 0.0;
    double last_integrand_ = 0.0;
};

struct TraceRow {
    double t = 0.0;
    NormBundle n;
    double energy = 0.0;
    double dissipation = 0.0;
};

void write_trace_header(std::ostream& os);
void write_trace_row(std::ostream& os, const TraceRow& row);
void write_macro_csv(std::ostream& os, const MacroFields& m);

struct Coercivity {
    bool in_null_space = false;
    double ratio_nu = 0.0;     // <f, L f> / ||(I-P) f||_nu^2
    double ratio_plain = 0.0;  // <f, L f> / ||(I-P) f||_2^2
};

Coercivity coercivity_check(const VelocityGrid& grid, const CollisionMatrices& mats, const MacroProjector& proj,
                            const VelocityFunction& f, double tau_null = 1e-3);

struct LimitResiduals {
    double divergence = 0.0;  // || d1 b1 ||_2
    double boussinesq = 0.0;  // || d1 (a + c) ||_2
};

// Derivatives are taken inside each cell for dg_nodal fields and by centred differences
// (one-sided at the ends) for cell averages.
LimitResiduals limit_residuals(const MacroFields& m);

}  // namespace kinetic
