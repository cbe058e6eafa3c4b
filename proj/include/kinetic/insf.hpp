#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace kinetic {

enum class Regime { dirichlet, navier, perfect_slip };

Regime parse_regime(const std::string& s);
std::string to_string(Regime r);

// u2(x) = c0 (H^2 - x^2) + slip on [-H, H]
struct ChannelVelocity {
    bool has_steady_solution = true;
    std::string note;
    double curvature = 0.0;  // Phi2 / (2 sigma)
    double slip = 0.0;
    double H = 1.0;
    double operator()(double x) const { return curvature * (H * H - x * x) + slip; }
    double derivative(double x) const { return -2.0 * curvature * x; }
};

// theta(x) = A x + B
struct ChannelTemperature {
    double A = 0.0;
    double B = 0.0;
    bool adiabatic_degenerate = false;
    double operator()(double x) const { return A * x + B; }
};

ChannelVelocity channel_velocity(double sigma, double phi2, double H, Regime regime, double lambda = 0.0);

ChannelTemperature channel_temperature(double kappa, double theta_minus, double theta_plus, double H, Regime regime,
                                       double lambda = 0.0);

// CSV rows x1,u2,theta at `points` equispaced positions including both walls.
void write_profile_csv(std::ostream& os, const ChannelVelocity& u, const ChannelTemperature& th, int points);

}  // namespace kinetic
