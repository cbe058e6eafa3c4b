#pragma once

#include "kinetic/collision.hpp"
#include "kinetic/diagnostics.hpp"
#include "kinetic/field.hpp"
#include "kinetic/wall.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace kinetic {

// Channel data: force Phi = (0, phi2, 0), wall temperatures at x1 = -H and x1 = +H,
// Theta_w linear in between.
struct ChannelData {
    double eps = 0.1;
    double alpha = 1.0;
    double phi2 = 0.0;
    double theta_minus = 0.0;
    double theta_plus = 0.0;

    double Theta(double x, double H) const { return 0.5 * (theta_plus + theta_minus) + 0.5 * (theta_plus - theta_minus) * x / H; }
    double mean_Theta() const { return 0.5 * (theta_plus + theta_minus); }
};

// Everything that depends on the velocity grid only.
struct VelocityContext {
    const VelocityGrid& grid;
    const CollisionKernel& kernel;
    const CollisionMatrices& mats;
    MacroProjector proj;

    VelocityContext(const VelocityGrid& g, const CollisionKernel& k, const CollisionMatrices& m)
        : grid(g), kernel(k), mats(m), proj(g) {}
};

// mu^{-1/2} phi2 d/dv2 (sqrt(mu) f) by centred differences on the grid, with its sqrt(mu) moment removed.
VelocityFunction field_term(const VelocityGrid& grid, double phi2, const VelocityFunction& f);

// f_w at every column of the layout.
DistributionField build_fw_field(const VelocityGrid& grid, const SpatialMesh& mesh, Layout layout, const ChannelData& d);

struct RsTerms {
    DistributionField force;      // eps Phi.v sqrt(mu)
    DistributionField transport;  // -v1 d1 f_w
    DistributionField field;      // -eps^2 mu^{-1/2} Phi.grad_v(sqrt(mu) f_w)
    DistributionField gamma;      // Gamma(f_w, f_w)
    DistributionField total() const;
};

RsTerms build_Rs(const VelocityContext& ctx, const SpatialMesh& mesh, Layout layout, const ChannelData& d);

struct SteadyOptions {
    double tol_picard = 1e-8;
    int k_max = 200;
};

enum class SteadyStatus { converged, not_converged, no_steady_solution };

std::string to_string(SteadyStatus s);

struct SteadyResult {
    SteadyStatus status = SteadyStatus::not_converged;
    std::string note;
    int iterations = 0;
    std::vector<double> residual_history;
    DistributionField f;  // f_s, dg_nodal
    double mass = 0.0;
};

// L2 norm over x and v: sqrt(sum_col weight * h^3 * |col|^2)
double field_norm(const VelocityGrid& grid, const DistributionField& f);

// sum_col weight * h^3 * sqrt_mu . col
double field_mass(const VelocityGrid& grid, const DistributionField& f);

// Steady problem for f_s on an upwind DG1 discretisation (nodal values at cell edges, lumped),
// linear part solved directly by block elimination across cells, per (v2, v3) parity class.
class SteadySolver {
public:
    SteadySolver(const VelocityContext& ctx, const SpatialMesh& mesh, const ChannelData& data);
    ~SteadySolver();

    SteadyResult solve(const SteadyOptions& opt = {});
    const WallModel& wall() const { return wall_; }

private:
    struct ParityBlock;
    void factorize(ParityBlock& b);
    Eigen::MatrixXd solve_linear(const Eigen::MatrixXd& rhs_nodes, const VelocityFunction& r_left,
                                 const VelocityFunction& r_right);

    const VelocityContext& ctx_;
    SpatialMesh mesh_;
    ChannelData data_;
    WallModel wall_;
    std::vector<std::unique_ptr<ParityBlock>> blocks_;
};

struct UnsteadyOptions {
    double dt = 1e-3;
    double cfl = 1.0;
    bool periodic = false;
    bool include_gamma = true;
};

// Cell averages of f_s + f_w, the background the perturbation evolves against.
DistributionField steady_background(const VelocityGrid& grid, const DistributionField* fs, const SpatialMesh& mesh,
                                    const ChannelData& d);

struct Checkpoint {
    static constexpr std::uint32_t version = 1;
    int n_per_axis = 0;
    double v_max = 0.0;
    int n_cells = 0;
    double H = 0.0;
    double eps = 0.0;
    double alpha = 0.0;
    double t = 0.0;
    std::int64_t step = 0;
    FieldMode mode = FieldMode::fluctuation;
    Eigen::MatrixXd values;
    Eigen::MatrixXd background;
};

void write_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint read_checkpoint(const std::string& path);

// Perturbation f~ on cell averages: first-order upwind transport with the Maxwell closure
// on ghost values, then a collision substep with nu implicit and K, Gamma explicit.
class UnsteadyStepper {
public:
    UnsteadyStepper(const VelocityContext& ctx, const SpatialMesh& mesh, const ChannelData& data,
                    const DistributionField& background, const UnsteadyOptions& opt);

    void set_state(const DistributionField& f, double t = 0.0, std::int64_t step = 0);
    const DistributionField& state() const { return f_; }
    double time() const { return t_; }
    std::int64_t steps() const { return step_; }
    void step();
    double mass() const { return field_mass(ctx_.grid, f_); }
    const WallModel& wall() const { return wall_; }

    Checkpoint checkpoint() const;
    void restore(const Checkpoint& c);

private:
    void transport(const Eigen::MatrixXd& f, Eigen::MatrixXd& out) const;

    const VelocityContext& ctx_;
    SpatialMesh mesh_;
    ChannelData data_;
    UnsteadyOptions opt_;
    WallModel wall_;
    DistributionField g_;
    RowMatrix gamma_gg_;
    DistributionField f_;
    double t_ = 0.0;
    std::int64_t step_ = 0;
};

// Absolute F on cell averages: F' = [eps F/dt + Q+(F,F)/eps - upwind flux] / [eps/dt + nu(F)/eps].
class PositivityStepper {
public:
    PositivityStepper(const VelocityContext& ctx, const SpatialMesh& mesh, const ChannelData& data, double dt);

    void set_state(const DistributionField& F, double t = 0.0, std::int64_t step = 0);
    const DistributionField& state() const { return F_; }
    void step();
    double mass() const;
    double min_value() const { return F_.values.minCoeff(); }
    std::int64_t steps() const { return step_; }
    const WallModel& wall() const { return wall_; }

    Checkpoint checkpoint() const;
    void restore(const Checkpoint& c);

private:
    const VelocityContext& ctx_;
    SpatialMesh mesh_;
    ChannelData data_;
    double dt_;
    WallModel wall_;
    DistributionField F_;
    double t_ = 0.0;
    std::int64_t step_ = 0;
};

}  // namespace kinetic
