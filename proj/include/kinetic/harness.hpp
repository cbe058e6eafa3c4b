#pragma once

#include "kinetic/collision.hpp"
#include "kinetic/geometry.hpp"
#include "kinetic/insf.hpp"
#include "kinetic/solver.hpp"

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace kinetic {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class AlphaRule { fixed, proportional, zero };

struct RunConfig {
    // [grid]
    int n_per_axis = 12;
    double v_max = 6.0;
    // [collision]
    int n_theta = 4;
    int n_phi = 8;
    // [channel]
    double H = 1.0;
    int n_cells = 16;
    double phi2 = 0.1;
    double theta_minus = -0.05;
    double theta_plus = 0.05;
    // [sweep]
    std::vector<double> eps_list{0.1, 0.05, 0.025};
    AlphaRule alpha_rule = AlphaRule::fixed;
    double alpha = 1.0;
    double lambda = 1.0;
    // [solver]
    double tol_picard = 1e-8;
    int k_max = 200;
    double dt = 0.0;  // 0: half the CFL bound
    double cfl = 1.0;
    int steps = 100;
    int checkpoint_every = 0;
    std::string restart;
    double amplitude = 0.01;
    std::uint64_t seed = 1;
    // [diagnostics]
    double energy_lambda = 0.0;
    // [census]
    std::string census_domain = "disk";
    double census_size = 1.0;
    double census_eps = 5e-4;
    double census_T0 = 10.0;
    double census_eta = 0.1;
    double census_v_cap = 5.0;
    int census_samples = 1000;
    std::uint64_t census_seed = 1;
    // [run]
    int workers = 1;
    std::string out_dir = "out";

    double alpha_for(double eps) const;
    Regime regime() const;
};

// INI text with [section] headers and key = value lines; overrides are "section.key=value".
RunConfig parse_config(const std::string& ini_text, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});
void validate(const RunConfig& c);
// key/value echo of every setting, in a fixed order
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c);

// Grid, kernel, matrices and transport coefficients shared by all runs of one config.
struct Workspace {
    VelocityGrid grid;
    std::unique_ptr<CollisionKernel> kernel;
    CollisionMatrices mats;
    TransportCoefficients coeffs;
    std::unique_ptr<VelocityContext> ctx;
};

std::unique_ptr<Workspace> make_workspace(const RunConfig& c, bool with_coefficients = true);

ChannelData channel_data(const RunConfig& c, double eps);

struct BoundaryObservables {
    double b2_wall = 0.0;        // max over walls of |b2|
    double c_jump = 0.0;         // max over walls of |c - theta_w|
    double slip_defect = 0.0;    // max over walls of |sigma d_n b2 + lambda b2|
    double robin_defect = 0.0;   // max over walls of |kappa d_n c + 4/5 lambda (c - theta_w)|
};

// Wall values and normal derivatives from the three wall-adjacent cell values by quadratic extrapolation.
BoundaryObservables extract_boundary_observables(const MacroFields& cells, double sigma, double kappa, double lambda,
                                                 double theta_minus, double theta_plus);

// Macro fields of cell averages.
MacroFields cell_macro(const MacroProjector& proj, const DistributionField& f);

struct SweepRow {
    double eps = 0.0;
    double alpha = 0.0;
    std::string status;
    std::string note;
    int iterations = 0;
    BoundaryObservables wall;
    double profile_error_u = 0.0;
    double profile_error_theta = 0.0;
    double divergence = 0.0;
    double boussinesq = 0.0;
    double IP_nu_over_eps = 0.0;
    double P_norm = 0.0;
    double mass = 0.0;
    double runtime = 0.0;  // seconds, not serialised
    MacroFields profile;   // cell averages of f_s + f_w
};

struct SweepReport {
    Regime regime = Regime::dirichlet;
    TransportCoefficients coeffs;
    std::vector<SweepRow> rows;
    std::map<std::string, double> slopes;
    std::map<std::string, bool> monotone;
};

SweepRow run_steady_case(const Workspace& ws, const RunConfig& c, double eps);
SweepReport run_sweep(const Workspace& ws, const RunConfig& c);

// least-squares slope of log y against log x
double log_slope(const std::vector<double>& x, const std::vector<double>& y);
// strictly decreasing along the list
bool decreasing(const std::vector<double>& y);

struct CheckResult {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string detail;
};

struct VerifyOptions {
    bool break_reflection = false;  // fault injection for the flux-conservation check
};

// quadrature and collision tolerances by grid resolution
double tau_q_for(int n_per_axis);
double tau_Q_for(int n_per_axis);

std::vector<CheckResult> run_verify(const Workspace& ws, const RunConfig& c, const VerifyOptions& opt = {});

struct CensusOutcome {
    CensusReport interior;
    CensusReport boundary;
    double c_xi = 0.0;
};

CensusOutcome run_census(const RunConfig& c, double eps);

struct UnsteadyOutcome {
    int steps = 0;
    double dt = 0.0;
    double max_mass_drift = 0.0;  // per step
    double initial_norm = 0.0;
    double final_norm = 0.0;
    double decay_rate = 0.0;      // fitted from log ||f~(t)||_2
    double energy = 0.0;
    double dissipation = 0.0;
    std::vector<TraceRow> trace;
};

// f~ from a seeded zero-mass initial perturbation against the steady background.
UnsteadyOutcome run_unsteady(const Workspace& ws, const RunConfig& c, double eps, const std::string& out_dir);

}  // namespace kinetic

namespace kinetic {

// profile_eps<eps>.csv per row and summary.json into dir
void write_sweep_outputs(const SweepReport& r, const RunConfig& c, const std::string& dir);
void write_verify_outputs(const std::vector<CheckResult>& checks, const RunConfig& c, const std::string& dir);

}  // namespace kinetic
