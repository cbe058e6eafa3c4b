#include "kinetic/insf.hpp"

#include <iomanip>
#include <stdexcept>

namespace kinetic {

Regime parse_regime(const std::string& s) {
    if (s == "dirichlet") return Regime::dirichlet;
    if (s == "navier") return Regime::navier;
    if (s == "perfect-slip" || s == "perfect_slip") return Regime::perfect_slip;
    throw std::invalid_argument("unknown regime '" + s + "'");
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::dirichlet: return "dirichlet";
        case Regime::navier: return "navier";
        case Regime::perfect_slip: return "perfect-slip";
    }
    return "?";
}

ChannelVelocity channel_velocity(double sigma, double phi2, double H, Regime regime, double lambda) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    if (!(H > 0.0)) throw std::invalid_argument("H must be positive");
    ChannelVelocity u;
    u.H = H;
    u.curvature = phi2 / (2.0 * sigma);
    if (regime == Regime::navier && !(lambda > 0.0)) regime = Regime::perfect_slip;
    switch (regime) {
        case Regime::dirichlet: break;
        case Regime::navier: u.slip = phi2 * H / lambda; break;
        case Regime::perfect_slip:
            if (phi2 != 0.0) {
                u.has_steady_solution = false;
                u.note = "no-steady-solution: a tangential force cannot be balanced without wall friction";
                u.curvature = 0.0;
            }
            break;
    }
    return u;
}

ChannelTemperature channel_temperature(double kappa, double theta_minus, double theta_plus, double H, Regime regime,
                                       double lambda) {
    if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
    ChannelTemperature t;
    t.B = 0.5 * (theta_plus + theta_minus);
    const double half = 0.5 * (theta_plus - theta_minus);
    if (regime == Regime::navier && !(lambda > 0.0)) regime = Regime::perfect_slip;
    switch (regime) {
        case Regime::dirichlet: t.A = half / H; break;
        case Regime::navier: t.A = half / (H + 5.0 * kappa / (4.0 * lambda)); break;
        case Regime::perfect_slip: t.adiabatic_degenerate = true; break;
    }
    return t;
}

void write_profile_csv(std::ostream& os, const ChannelVelocity& u, const ChannelTemperature& th, int points) {
    os << "x1,u2,theta\n" << std::setprecision(17);
    for (int i = 0; i < points; ++i) {
        const double x = -u.H + 2.0 * u.H * i / (points - 1);
        os << x << ',' << u(x) << ',' << th(x) << '\n';
    }
}

}  // namespace kinetic
