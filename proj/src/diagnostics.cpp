#include "kinetic/diagnostics.hpp"

#include "kinetic/collision.hpp"

#include <cmath>
#include <iomanip>
#include <limits>

namespace kinetic {

MacroProjector::MacroProjector(const VelocityGrid& grid) : grid_(&grid) {
    basis_ = collision_invariants(grid);
    weighted_basis_ = basis_ * grid.cell_volume();
    Eigen::Matrix<double, 5, 5> G = weighted_basis_.transpose() * basis_;
    gram_.compute(G);
}

Eigen::Matrix<double, 5, 1> MacroProjector::coefficients(const VelocityFunction& f) const {
    Eigen::Matrix<double, 5, 1> r = weighted_basis_.transpose() * f;
    return gram_.solve(r);
}

VelocityFunction MacroProjector::P(const VelocityFunction& f) const { return basis_ * coefficients(f); }

Eigen::MatrixXd MacroProjector::P_columns(const Eigen::MatrixXd& f) const {
    Eigen::MatrixXd r = weighted_basis_.transpose() * f;
    return basis_ * gram_.solve(r);
}

MacroFields extract_macro(const MacroProjector& proj, const DistributionField& f) {
    MacroFields m;
    m.layout = f.layout;
    m.dx = f.mesh.dx;
    const int C = f.columns();
    m.x.resize(C);
    m.a.resize(C);
    m.c.resize(C);
    m.b.resize(C);
    for (int j = 0; j < C; ++j) {
        const auto q = proj.coefficients(f.values.col(j));
        m.x[j] = f.position(j);
        m.a[j] = q[0];
        m.b[j] = {q[1], q[2], q[3]};
        m.c[j] = q[4];
    }
    return m;
}

double mean_value(const VelocityGrid& grid, const DistributionField& f) {
    double num = 0.0, den = 0.0;
    const double mu_sum = grid.mu.sum();
    for (int j = 0; j < f.columns(); ++j) {
        num += f.weight(j) * grid.sqrt_mu.dot(f.values.col(j));
        den += f.weight(j) * mu_sum;
    }
    return num / den;
}

namespace {

double face_sum(const WallFace& face, const std::vector<int>& set, const VelocityFunction& g) {
    double s = 0.0;
    for (int i : set) s += face.flux[i] * g[i] * g[i];
    return s;
}

}  // namespace

NormBundle norms(const VelocityGrid& grid, const MacroProjector& proj, const VelocityFunction& nu,
                 const WallModel& wall, const DistributionField& f) {
    const double h3 = grid.cell_volume();
    NormBundle n;
    double p2 = 0.0, q2 = 0.0, f2 = 0.0;
    for (int j = 0; j < f.columns(); ++j) {
        const VelocityFunction col = f.values.col(j);
        const VelocityFunction pc = proj.P(col);
        const VelocityFunction qc = col - pc;
        const double wj = f.weight(j) * h3;
        p2 += wj * pc.squaredNorm();
        q2 += wj * qc.cwiseProduct(qc).dot(nu);
        f2 += wj * col.squaredNorm();
        n.weighted_sup = std::max(n.weighted_sup, col.cwiseProduct(grid.w).cwiseAbs().maxCoeff());
    }
    n.P_norm = std::sqrt(p2);
    n.IP_nu_norm = std::sqrt(q2);
    n.norm = std::sqrt(f2);

    double bp = 0.0, bm = 0.0, bq = 0.0;
    for (std::size_t k = 0; k < wall.faces.size() && k < 2; ++k) {
        const WallFace& face = wall.faces[k];
        const VelocityFunction tr = f.values.col(k == 0 ? f.left_trace() : f.right_trace());
        bp += face_sum(face, face.outgoing, tr);
        bm += face_sum(face, face.incoming, tr);
        const VelocityFunction r = tr - apply_P_gamma(grid, face, tr);
        bq += face_sum(face, face.outgoing, r);
    }
    n.bdy_plus = std::sqrt(bp);
    n.bdy_minus = std::sqrt(bm);
    n.bdy_IPg_plus = std::sqrt(bq);
    return n;
}

double EnergyTracker::integrand(double t, const NormBundle& f, const std::optional<NormBundle>& ft) const {
    const double e2 = std::exp(2.0 * lambda_ * t);
    auto part = [&](const NormBundle& b) {
        const double bdy2 = b.bdy_plus * b.bdy_plus + b.bdy_minus * b.bdy_minus;
        return b.P_norm * b.P_norm + b.IP_nu_norm * b.IP_nu_norm / (eps_ * eps_) +
               alpha_ / eps_ * (b.bdy_IPg_plus * b.bdy_IPg_plus + bdy2);
    };
    double s = part(f);
    if (ft) s += part(*ft);
    return e2 * s;
}

void EnergyTracker::record(double t, const NormBundle& f, const std::optional<NormBundle>& ft) {
    const double e2 = std::exp(2.0 * lambda_ * t);
    double inst = e2 * f.norm * f.norm;
    if (ft) inst += e2 * ft->norm * ft->norm;
    energy_ = std::max(energy_, inst);
    const double g = integrand(t, f, ft);
    if (started_ && t > last_t_) dissipation_ += 0.5 * (t - last_t_) * (g + last_integrand_);
    started_ = true;
    last_t_ = t;
    last_integrand_ = g;
}

void write_trace_header(std::ostream& os) {
    os << "t,P_norm,IP_nu_norm,norm,bdy_plus,bdy_minus,bdy_IPg_plus,weighted_sup,energy,dissipation\n";
}

void write_trace_row(std::ostream& os, const TraceRow& r) {
    os << std::setprecision(17) << r.t << ',' << r.n.P_norm << ',' << r.n.IP_nu_norm << ',' << r.n.norm << ','
       << r.n.bdy_plus << ',' << r.n.bdy_minus << ',' << r.n.bdy_IPg_plus << ',' << r.n.weighted_sup << ','
       << r.energy << ',' << r.dissipation << '\n';
}

void write_macro_csv(std::ostream& os, const MacroFields& m) {
    os << "x1,a,b1,b2,b3,c\n" << std::setprecision(17);
    for (std::size_t j = 0; j < m.size(); ++j)
        os << m.x[j] << ',' << m.a[j] << ',' << m.b[j][0] << ',' << m.b[j][1] << ',' << m.b[j][2] << ',' << m.c[j]
           << '\n';
}

Coercivity coercivity_check(const VelocityGrid& grid, const CollisionMatrices& mats, const MacroProjector& proj,
                            const VelocityFunction& f, double tau_null) {
    const double h3 = grid.cell_volume();
    const VelocityFunction q = proj.I_minus_P(f);
    const double qnu = std::sqrt(h3 * q.cwiseProduct(q).dot(mats.nu));
    const double fnu = std::sqrt(h3 * f.cwiseProduct(f).dot(mats.nu));
    Coercivity c;
    if (qnu < tau_null * std::max(fnu, std::numeric_limits<double>::min())) {
        c.in_null_space = true;
        return c;
    }
    const double form = h3 * f.dot(apply_L(mats, f));
    c.ratio_nu = form / (qnu * qnu);
    c.ratio_plain = form / (h3 * q.squaredNorm());
    return c;
}

LimitResiduals limit_residuals(const MacroFields& m) {
    LimitResiduals r;
    double d2 = 0.0, s2 = 0.0;
    if (m.layout == Layout::dg_nodal) {
        for (std::size_t j = 0; j + 1 < m.size(); j += 2) {
            const double db = (m.b[j + 1][0] - m.b[j][0]) / m.dx;
            const double ds = (m.a[j + 1] + m.c[j + 1] - m.a[j] - m.c[j]) / m.dx;
            d2 += m.dx * db * db;
            s2 += m.dx * ds * ds;
        }
    } else {
        const std::size_t n = m.size();
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t lo = j == 0 ? 0 : j - 1;
            const std::size_t hi = j + 1 == n ? j : j + 1;
            const double span = m.x[hi] - m.x[lo];
            const double db = (m.b[hi][0] - m.b[lo][0]) / span;
            const double ds = (m.a[hi] + m.c[hi] - m.a[lo] - m.c[lo]) / span;
            d2 += m.dx * db * db;
            s2 += m.dx * ds * ds;
        }
    }
    r.divergence = std::sqrt(d2);
    r.boussinesq = std::sqrt(s2);
    return r;
}

}  // namespace kinetic
