#include "kinetic/solver.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kinetic {

namespace {

RowMatrix to_rows(const Eigen::MatrixXd& m) { return RowMatrix(m); }

double max_abs_v1(const VelocityGrid& g) { return g.v_max - 0.5 * g.h; }

}  // namespace

VelocityFunction field_term(const VelocityGrid& grid, double phi2, const VelocityFunction& f) {
    const int n = grid.n_per_axis;
    const VelocityFunction u = grid.sqrt_mu.cwiseProduct(f);
    VelocityFunction r(f.size());
    for (int idx = 0; idx < static_cast<int>(f.size()); ++idx) {
        const auto c = grid.coords(idx);
        const double up = c[1] + 1 < n ? u[grid.index(c[0], c[1] + 1, c[2])] : 0.0;
        const double dn = c[1] > 0 ? u[grid.index(c[0], c[1] - 1, c[2])] : 0.0;
        r[idx] = phi2 * (up - dn) / (2.0 * grid.h) / grid.sqrt_mu[idx];
    }
    const double m = grid.sqrt_mu.dot(r) / grid.mu.sum();
    r -= m * grid.sqrt_mu;
    return r;
}

DistributionField build_fw_field(const VelocityGrid& grid, const SpatialMesh& mesh, Layout layout,
                                 const ChannelData& d) {
    DistributionField f(static_cast<int>(grid.size()), mesh, layout);
    for (int j = 0; j < f.columns(); ++j)
        f.values.col(j) = build_fw(grid, d.Theta(f.position(j), mesh.H), d.mean_Theta());
    return f;
}

DistributionField RsTerms::total() const {
    DistributionField t = force;
    t.values += transport.values + field.values + gamma.values;
    return t;
}

RsTerms build_Rs(const VelocityContext& ctx, const SpatialMesh& mesh, Layout layout, const ChannelData& d) {
    const VelocityGrid& g = ctx.grid;
    const int N = static_cast<int>(g.size());
    RsTerms r;
    r.force = DistributionField(N, mesh, layout);
    r.transport = r.force;
    r.field = r.force;
    const DistributionField fw = build_fw_field(g, mesh, layout, d);
    const double dlt = mesh.dx;
    for (int j = 0; j < fw.columns(); ++j) {
        const double x = fw.position(j);
        const VelocityFunction fp = build_fw(g, d.Theta(x + dlt, mesh.H), d.mean_Theta());
        const VelocityFunction fm = build_fw(g, d.Theta(x - dlt, mesh.H), d.mean_Theta());
        for (int i = 0; i < N; ++i) {
            const Vec3& v = g.nodes[i];
            r.force.values(i, j) = d.eps * d.phi2 * v[1] * g.sqrt_mu[i];
            r.transport.values(i, j) = -v[0] * (fp[i] - fm[i]) / (2.0 * dlt);
        }
        r.field.values.col(j) = -d.eps * d.eps * field_term(g, d.phi2, fw.values.col(j));
    }
    r.gamma = r.force;
    r.gamma.values = Eigen::MatrixXd(gamma_batch(ctx.kernel, to_rows(fw.values), nullptr));
    return r;
}

std::string to_string(SteadyStatus s) {
    switch (s) {
        case SteadyStatus::converged: return "converged";
        case SteadyStatus::not_converged: return "not-converged";
        case SteadyStatus::no_steady_solution: return "no-steady-solution";
    }
    return "?";
}

double field_norm(const VelocityGrid& grid, const DistributionField& f) {
    double s = 0.0;
    for (int j = 0; j < f.columns(); ++j) s += f.weight(j) * f.values.col(j).squaredNorm();
    return std::sqrt(s * grid.cell_volume());
}

double field_mass(const VelocityGrid& grid, const DistributionField& f) {
    double s = 0.0;
    for (int j = 0; j < f.columns(); ++j) s += f.weight(j) * grid.sqrt_mu.dot(f.values.col(j));
    return s * grid.cell_volume();
}

// ---------------------------------------------------------------------------------------------
// Steady solver

struct SteadySolver::ParityBlock {
    int p2 = 0, p3 = 0;
    std::vector<int> rep;
    std::vector<int> mirror;
    std::vector<double> v1;
    std::vector<int> pos, neg;
    Eigen::MatrixXd A;
    std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> lu;
    bool ready = false;
    bool pinned = false;
    int pin = -1;

    double sign(unsigned mask) const {
        double s = 1.0;
        if (p2 && (mask & 2u)) s = -s;
        if (p3 && (mask & 4u)) s = -s;
        return s;
    }
    int size() const { return static_cast<int>(rep.size()); }

    Eigen::VectorXd restrict(const VelocityGrid& g, const VelocityFunction& f) const {
        Eigen::VectorXd r(size());
        for (int a = 0; a < size(); ++a) {
            double s = 0.0;
            for (unsigned m : {0u, 2u, 4u, 6u}) s += sign(m) * f[g.reflect(rep[a], m)];
            r[a] = 0.25 * s;
        }
        return r;
    }
    void extend(const VelocityGrid& g, const Eigen::VectorXd& x, Eigen::Ref<VelocityFunction> out) const {
        for (int a = 0; a < size(); ++a)
            for (unsigned m : {0u, 2u, 4u, 6u}) out[g.reflect(rep[a], m)] += sign(m) * x[a];
    }
};

SteadySolver::SteadySolver(const VelocityContext& ctx, const SpatialMesh& mesh, const ChannelData& data)
    : ctx_(ctx), mesh_(mesh), data_(data) {
    const VelocityGrid& g = ctx.grid;
    const int n = g.n_per_axis;
    if (n % 2) throw std::invalid_argument("the velocity grid needs an even number of points per axis");
    wall_ = build_slab_wall(g, data.alpha, data.eps, data.theta_minus, data.theta_plus, FluxWeights::transport);
    const int hn = n / 2;
    for (int p2 = 0; p2 < 2; ++p2)
        for (int p3 = 0; p3 < 2; ++p3) {
            auto b = std::make_unique<ParityBlock>();
            b->p2 = p2;
            b->p3 = p3;
            for (int i = 0; i < n; ++i)
                for (int j = hn; j < n; ++j)
                    for (int k = hn; k < n; ++k) {
                        b->rep.push_back(g.index(i, j, k));
                        b->mirror.push_back(((n - 1 - i) * hn + (j - hn)) * hn + (k - hn));
                    }
            const int Nc = b->size();
            b->v1.resize(Nc);
            for (int a = 0; a < Nc; ++a) {
                b->v1[a] = g.nodes[b->rep[a]][0];
                (b->v1[a] > 0 ? b->pos : b->neg).push_back(a);
            }
            blocks_.push_back(std::move(b));
        }
}

SteadySolver::~SteadySolver() = default;

void SteadySolver::factorize(ParityBlock& b) {
    const VelocityGrid& g = ctx_.grid;
    const CollisionMatrices& mats = ctx_.mats;
    const int Nc = b.size();
    const int S = 2 * Nc;
    const int M = mesh_.n_cells;
    const double half = 0.5 * mesh_.dx;
    const double eps = data_.eps;
    const double alpha = data_.alpha;
    const bool ee = b.p2 == 0 && b.p3 == 0;

    b.A.resize(Nc, Nc);
    for (int bb = 0; bb < Nc; ++bb) {
        for (int a = 0; a < Nc; ++a) {
            double s = 0.0;
            for (unsigned m : {0u, 2u, 4u, 6u}) s += b.sign(m) * mats.K(b.rep[a], g.reflect(b.rep[bb], m));
            b.A(a, bb) = -s / eps;
        }
        b.A(bb, bb) += mats.nu[b.rep[bb]] / eps;
    }

    b.pinned = ee;
    if (ee) {
        int best = b.pos.front();
        for (int a : b.pos)
            if (g.sqrt_mu[b.rep[a]] > g.sqrt_mu[b.rep[best]]) best = a;
        b.pin = Nc + best;
    }

    // diffuse re-emission weights: row a (incoming), column c (outgoing)
    auto diffuse = [&](const WallFace& face, int a, int c) {
        return 4.0 * face.c_P * g.sqrt_mu[b.rep[a]] * g.sqrt_mu[b.rep[c]] * face.flux[b.rep[c]];
    };

    b.lu.assign(M, Eigen::PartialPivLU<Eigen::MatrixXd>());
    Eigen::MatrixXd D(S, S);
    for (int j = 0; j < M; ++j) {
        D.setZero();
        D.topLeftCorner(Nc, Nc) = half * b.A;
        D.bottomRightCorner(Nc, Nc) = half * b.A;
        for (int a = 0; a < Nc; ++a) {
            const double v = b.v1[a];
            const double u = std::abs(v);
            if (v > 0) {
                D(a, a) += 0.5 * v;
                D(a, Nc + a) += 0.5 * v;
                D(Nc + a, Nc + a) += 0.5 * v;
                D(Nc + a, a) -= 0.5 * v;
            } else {
                D(a, a) += 0.5 * u;
                D(a, Nc + a) -= 0.5 * u;
                D(Nc + a, Nc + a) += 0.5 * u;
                D(Nc + a, a) += 0.5 * u;
            }
        }
        if (j == 0) {
            const WallFace& face = wall_.faces[0];
            for (int a : b.pos) {
                const double v = b.v1[a];
                D(a, b.mirror[a]) -= v * (1.0 - alpha);
                if (ee)
                    for (int c : b.neg) D(a, c) -= v * alpha * diffuse(face, a, c);
            }
        }
        if (j == M - 1) {
            const WallFace& face = wall_.faces[1];
            for (int a : b.neg) {
                const double u = -b.v1[a];
                D(Nc + a, Nc + b.mirror[a]) -= u * (1.0 - alpha);
                if (ee)
                    for (int c : b.pos) D(Nc + a, Nc + c) -= u * alpha * diffuse(face, a, c);
            }
            if (b.pinned) D(b.pin, b.pin) += 1.0;
        }
        if (j > 0) {
            const int nn = static_cast<int>(b.neg.size());
            Eigen::MatrixXd E = Eigen::MatrixXd::Zero(S, nn);
            for (int q = 0; q < nn; ++q) E(Nc + b.neg[q], q) = 1.0;
            const Eigen::MatrixXd X = b.lu[j - 1].solve(E);
            for (int q = 0; q < nn; ++q) {
                const double ub = -b.v1[b.neg[q]];
                for (int a : b.pos) D(a, b.neg[q]) -= b.v1[a] * ub * X(Nc + a, q);
            }
        }
        b.lu[j].compute(D);
    }
    b.ready = true;
}

Eigen::MatrixXd SteadySolver::solve_linear(const Eigen::MatrixXd& src, const VelocityFunction& r_left,
                                           const VelocityFunction& r_right) {
    const VelocityGrid& g = ctx_.grid;
    const int M = mesh_.n_cells;
    const double half = 0.5 * mesh_.dx;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(src.rows(), src.cols());
    for (auto& bp : blocks_) {
        ParityBlock& b = *bp;
        const int Nc = b.size();
        const int S = 2 * Nc;
        std::vector<Eigen::VectorXd> y(M, Eigen::VectorXd(S));
        double scale = 0.0;
        for (int j = 0; j < M; ++j) {
            y[j].head(Nc) = half * b.restrict(g, src.col(2 * j));
            y[j].tail(Nc) = half * b.restrict(g, src.col(2 * j + 1));
        }
        const Eigen::VectorXd rl = b.restrict(g, r_left);
        const Eigen::VectorXd rr = b.restrict(g, r_right);
        for (int a : b.pos) y[0][a] += b.v1[a] * rl[a];
        for (int a : b.neg) y[M - 1][Nc + a] -= b.v1[a] * rr[a];
        for (int j = 0; j < M; ++j) scale = std::max(scale, y[j].cwiseAbs().maxCoeff());
        if (scale == 0.0) continue;
        if (!b.ready) factorize(b);

        if (b.pinned) {
            double l = 0.0;
            for (int j = 0; j < M; ++j)
                for (int a = 0; a < Nc; ++a) l += g.sqrt_mu[b.rep[a]] * (y[j][a] + y[j][Nc + a]);
            y[M - 1][b.pin] -= l / g.sqrt_mu[b.rep[b.pin - Nc]];
        }
        for (int j = 1; j < M; ++j) {
            const Eigen::VectorXd z = b.lu[j - 1].solve(y[j - 1]);
            for (int a : b.pos) y[j][a] += b.v1[a] * z[Nc + a];
        }
        std::vector<Eigen::VectorXd> x(M);
        x[M - 1] = b.lu[M - 1].solve(y[M - 1]);
        for (int j = M - 2; j >= 0; --j) {
            Eigen::VectorXd r = y[j];
            for (int a : b.neg) r[Nc + a] -= b.v1[a] * x[j + 1][a];
            x[j] = b.lu[j].solve(r);
        }
        if (b.pinned) {
            double m = 0.0, mm = 0.0;
            for (int j = 0; j < M; ++j)
                for (int a = 0; a < Nc; ++a) {
                    const double s = g.sqrt_mu[b.rep[a]];
                    m += s * (x[j][a] + x[j][Nc + a]);
                    mm += 2.0 * s * s;
                }
            const double c = -m / mm;
            for (int j = 0; j < M; ++j)
                for (int a = 0; a < Nc; ++a) {
                    const double s = g.sqrt_mu[b.rep[a]];
                    x[j][a] += c * s;
                    x[j][Nc + a] += c * s;
                }
        }
        for (int j = 0; j < M; ++j) {
            b.extend(g, x[j].head(Nc), out.col(2 * j));
            b.extend(g, x[j].tail(Nc), out.col(2 * j + 1));
        }
    }
    return out;
}

SteadyResult SteadySolver::solve(const SteadyOptions& opt) {
    const VelocityGrid& g = ctx_.grid;
    const int N = static_cast<int>(g.size());
    SteadyResult res;
    res.f = DistributionField(N, mesh_, Layout::dg_nodal);
    if (data_.alpha == 0.0) {
        res.status = SteadyStatus::no_steady_solution;
        res.note = data_.phi2 != 0.0
                       ? "specular walls cannot balance a tangential force: momentum grows without bound"
                       : "specular walls leave momentum and energy undetermined";
        return res;
    }
    const double eps = data_.eps;
    const RsTerms rs = build_Rs(ctx_, mesh_, Layout::dg_nodal, data_);
    const Eigen::MatrixXd lin = rs.force.values + rs.transport.values + rs.field.values;
    const DistributionField fw = build_fw_field(g, mesh_, Layout::dg_nodal, data_);
    const WallFace& fl = wall_.faces[0];
    const WallFace& fr = wall_.faces[1];
    const VelocityFunction q2l =
        apply_Q2(g, fl, build_phi_eps(g, data_.theta_minus, data_.mean_Theta(), eps), eps);
    const VelocityFunction q2r = apply_Q2(g, fr, build_phi_eps(g, data_.theta_plus, data_.mean_Theta(), eps), eps);
    auto incoming_only = [](const WallFace& face, const VelocityFunction& v) {
        VelocityFunction r = VelocityFunction::Zero(v.size());
        for (int i : face.incoming) r[i] = v[i];
        return r;
    };

    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(N, res.f.columns());
    DistributionField diff = res.f;
    res.status = SteadyStatus::not_converged;
    for (int k = 0; k < opt.k_max; ++k) {
        const Eigen::MatrixXd gsum = f + fw.values;
        const Eigen::MatrixXd gam(gamma_batch(ctx_.kernel, to_rows(gsum), nullptr));
        Eigen::MatrixXd src = gam - ctx_.proj.P_columns(gam) + lin;
        for (int j = 0; j < src.cols(); ++j) src.col(j) -= eps * eps * field_term(g, data_.phi2, f.col(j));
        const VelocityFunction rl =
            incoming_only(fl, data_.alpha * (eps * apply_Q1(g, fl, f.col(0), eps) + q2l));
        const VelocityFunction rr =
            incoming_only(fr, data_.alpha * (eps * apply_Q1(g, fr, f.col(f.cols() - 1), eps) + q2r));
        Eigen::MatrixXd fn = solve_linear(src, rl, rr);
        diff.values = fn - f;
        const double d = field_norm(g, diff);
        res.residual_history.push_back(d);
        f = std::move(fn);
        res.iterations = k + 1;
        if (!std::isfinite(d)) break;
        if (d <= opt.tol_picard) {
            res.status = SteadyStatus::converged;
            break;
        }
    }
    res.f.values = f;
    res.mass = field_mass(g, res.f);
    if (res.status != SteadyStatus::converged)
        res.note = "Picard iteration stopped after " + std::to_string(res.iterations) + " iterations";
    return res;
}

// ---------------------------------------------------------------------------------------------
// Unsteady perturbation

DistributionField steady_background(const VelocityGrid& grid, const DistributionField* fs, const SpatialMesh& mesh,
                                    const ChannelData& d) {
    DistributionField g = build_fw_field(grid, mesh, Layout::cell_average, d);
    if (fs) g.values += fs->cell_averages();
    return g;
}

UnsteadyStepper::UnsteadyStepper(const VelocityContext& ctx, const SpatialMesh& mesh, const ChannelData& data,
                                 const DistributionField& background, const UnsteadyOptions& opt)
    : ctx_(ctx), mesh_(mesh), data_(data), opt_(opt), g_(background) {
    const double limit = opt.cfl * data.eps * mesh.dx / max_abs_v1(ctx.grid);
    if (!(opt.dt > 0.0) || opt.dt > limit * (1.0 + 1e-12))
        throw std::invalid_argument("time step violates the transport CFL bound dt <= " + std::to_string(limit));
    if (g_.layout != Layout::cell_average || g_.mesh.n_cells != mesh.n_cells)
        throw std::invalid_argument("background must be cell averages on the same mesh");
    wall_ = build_slab_wall(ctx.grid, data.alpha, data.eps, data.theta_minus, data.theta_plus, FluxWeights::transport);
    if (opt.include_gamma) gamma_gg_ = gamma_batch(ctx.kernel, to_rows(g_.values), nullptr);
    f_ = DistributionField(static_cast<int>(ctx.grid.size()), mesh, Layout::cell_average);
}

void UnsteadyStepper::set_state(const DistributionField& f, double t, std::int64_t step) {
    if (f.layout != Layout::cell_average || f.columns() != mesh_.n_cells)
        throw std::invalid_argument("state must be cell averages on the solver mesh");
    f_ = f;
    t_ = t;
    step_ = step;
}

namespace {

// Incoming ghost values of the linearised Maxwell condition from the wall-adjacent column.
VelocityFunction linear_ghost(const VelocityGrid& g, const WallFace& face, double alpha, const VelocityFunction& f) {
    VelocityFunction r = VelocityFunction::Zero(f.size());
    double flux = 0.0;
    for (int i : face.outgoing) flux += face.flux[i] * g.sqrt_mu[i] * f[i];
    for (int i : face.incoming)
        r[i] = (1.0 - alpha) * f[face.reflect[i]] + alpha * face.wall_maxwellian[i] / g.sqrt_mu[i] * flux;
    return r;
}

}  // namespace

void UnsteadyStepper::transport(const Eigen::MatrixXd& f, Eigen::MatrixXd& out) const {
    const VelocityGrid& g = ctx_.grid;
    const int N = static_cast<int>(g.size());
    const int M = mesh_.n_cells;
    const double c = opt_.dt / (data_.eps * mesh_.dx);
    VelocityFunction gl, gr;
    if (opt_.periodic) {
        gl = f.col(M - 1);
        gr = f.col(0);
    } else {
        gl = linear_ghost(g, wall_.faces[0], data_.alpha, f.col(0));
        gr = linear_ghost(g, wall_.faces[1], data_.alpha, f.col(M - 1));
    }
    out = f;
    for (int j = 0; j < M; ++j) {
        for (int i = 0; i < N; ++i) {
            const double v = g.nodes[i][0];
            if (v > 0) {
                const double up = j > 0 ? f(i, j - 1) : gl[i];
                out(i, j) -= c * v * (f(i, j) - up);
            } else {
                const double dn = j + 1 < M ? f(i, j + 1) : gr[i];
                out(i, j) -= c * v * (dn - f(i, j));
            }
        }
        if (data_.phi2 != 0.0) out.col(j) -= opt_.dt * data_.eps * field_term(g, data_.phi2, f.col(j));
    }
}

void UnsteadyStepper::step() {
    const VelocityGrid& g = ctx_.grid;
    const double eps = data_.eps;
    const double dt = opt_.dt;
    Eigen::MatrixXd fs;
    transport(f_.values, fs);
    Eigen::MatrixXd G;
    if (opt_.include_gamma) {
        const Eigen::MatrixXd total = fs + g_.values;
        G = Eigen::MatrixXd(gamma_batch(ctx_.kernel, to_rows(total), nullptr) - gamma_gg_);
        G -= ctx_.proj.P_columns(G);
    }
    const Eigen::MatrixXd P = ctx_.proj.P_columns(fs);
    const Eigen::MatrixXd H = fs - P;
    Eigen::MatrixXd num = H + (dt / (eps * eps)) * (ctx_.mats.K * H);
    if (opt_.include_gamma) num += (dt / eps) * G;
    const VelocityFunction denom = VelocityFunction::Ones(g.size()) + (dt / (eps * eps)) * ctx_.mats.nu;
    num = denom.cwiseInverse().asDiagonal() * num;
    f_.values = P + num - ctx_.proj.P_columns(num);
    t_ += dt;
    ++step_;
}

Checkpoint UnsteadyStepper::checkpoint() const {
    Checkpoint c;
    c.n_per_axis = ctx_.grid.n_per_axis;
    c.v_max = ctx_.grid.v_max;
    c.n_cells = mesh_.n_cells;
    c.H = mesh_.H;
    c.eps = data_.eps;
    c.alpha = data_.alpha;
    c.t = t_;
    c.step = step_;
    c.mode = FieldMode::fluctuation;
    c.values = f_.values;
    c.background = g_.values;
    return c;
}

namespace {

void check_compatible(const Checkpoint& c, const VelocityGrid& g, const SpatialMesh& m, const ChannelData& d,
                      FieldMode mode) {
    if (c.n_per_axis != g.n_per_axis || c.v_max != g.v_max || c.n_cells != m.n_cells || c.H != m.H ||
        c.eps != d.eps || c.alpha != d.alpha || c.mode != mode)
        throw std::invalid_argument("checkpoint does not match the solver configuration");
    if (c.values.rows() != static_cast<Eigen::Index>(g.size()) || c.values.cols() != m.n_cells)
        throw std::invalid_argument("checkpoint field has the wrong shape");
}

}  // namespace

void UnsteadyStepper::restore(const Checkpoint& c) {
    check_compatible(c, ctx_.grid, mesh_, data_, FieldMode::fluctuation);
    if (c.background.size() && c.background != g_.values) {
        if (c.background.rows() != g_.values.rows() || c.background.cols() != g_.values.cols())
            throw std::invalid_argument("checkpoint background has the wrong shape");
        g_.values = c.background;
        if (opt_.include_gamma) gamma_gg_ = gamma_batch(ctx_.kernel, to_rows(g_.values), nullptr);
    }
    f_.values = c.values;
    t_ = c.t;
    step_ = c.step;
}

// ---------------------------------------------------------------------------------------------
// Absolute positivity-preserving step

PositivityStepper::PositivityStepper(const VelocityContext& ctx, const SpatialMesh& mesh, const ChannelData& data,
                                     double dt)
    : ctx_(ctx), mesh_(mesh), data_(data), dt_(dt) {
    const double limit = data.eps * mesh.dx / max_abs_v1(ctx.grid);
    if (!(dt > 0.0) || dt > limit * (1.0 + 1e-12))
        throw std::invalid_argument("time step violates the positivity bound dt <= " + std::to_string(limit));
    wall_ = build_slab_wall(ctx.grid, data.alpha, data.eps, data.theta_minus, data.theta_plus, FluxWeights::transport);
    F_ = DistributionField(static_cast<int>(ctx.grid.size()), mesh, Layout::cell_average, FieldMode::absolute);
    for (int j = 0; j < mesh.n_cells; ++j) F_.values.col(j) = ctx.grid.mu;
}

void PositivityStepper::set_state(const DistributionField& F, double t, std::int64_t step) {
    if (F.layout != Layout::cell_average || F.columns() != mesh_.n_cells)
        throw std::invalid_argument("state must be cell averages on the solver mesh");
    if (F.values.minCoeff() < 0.0) throw std::invalid_argument("absolute state must be nonnegative");
    F_ = F;
    F_.mode = FieldMode::absolute;
    t_ = t;
    step_ = step;
}

double PositivityStepper::mass() const {
    return F_.values.sum() * mesh_.dx * ctx_.grid.cell_volume();
}

void PositivityStepper::step() {
    const VelocityGrid& g = ctx_.grid;
    const int N = static_cast<int>(g.size());
    const int M = mesh_.n_cells;
    const double eps = data_.eps;
    RowMatrix gain, nu;
    gain_loss_batch(ctx_.kernel, to_rows(F_.values), gain, nu);
    const Eigen::MatrixXd& F = F_.values;
    const VelocityFunction gl = apply_maxwell_bc_absolute(wall_, 0, F.col(0));
    const VelocityFunction gr = apply_maxwell_bc_absolute(wall_, 1, F.col(M - 1));
    const double c = 1.0 / mesh_.dx;
    const double r = eps / dt_;
    Eigen::MatrixXd out(N, M);
    VelocityFunction A(N), D(N);
    for (int j = 0; j < M; ++j) {
        for (int i = 0; i < N; ++i) {
            const double v = g.nodes[i][0];
            const double cv = c * std::abs(v);
            const double up = v > 0 ? (j > 0 ? F(i, j - 1) : gl[i]) : (j + 1 < M ? F(i, j + 1) : gr[i]);
            A[i] = std::max(r - cv, 0.0) * F(i, j) + cv * up;
            D[i] = r + nu(i, j) / eps;
        }
        // scale the gain so that the cell's collision term has zero mass at the new level
        double num = 0.0, den = 0.0;
        for (int i = 0; i < N; ++i) {
            num += nu(i, j) * A[i] / D[i];
            den += gain(i, j) * r / D[i];
        }
        const double s = den > 0.0 ? num / den : 1.0;
        for (int i = 0; i < N; ++i) out(i, j) = (A[i] + s * gain(i, j) / eps) / D[i];
    }
    if (out.minCoeff() < 0.0) throw std::runtime_error("positivity step produced a negative value");
    F_.values = out;
    t_ += dt_;
    ++step_;
}

Checkpoint PositivityStepper::checkpoint() const {
    Checkpoint c;
    c.n_per_axis = ctx_.grid.n_per_axis;
    c.v_max = ctx_.grid.v_max;
    c.n_cells = mesh_.n_cells;
    c.H = mesh_.H;
    c.eps = data_.eps;
    c.alpha = data_.alpha;
    c.t = t_;
    c.step = step_;
    c.mode = FieldMode::absolute;
    c.values = F_.values;
    return c;
}

void PositivityStepper::restore(const Checkpoint& c) {
    check_compatible(c, ctx_.grid, mesh_, data_, FieldMode::absolute);
    F_.values = c.values;
    t_ = c.t;
    step_ = c.step;
}

// ---------------------------------------------------------------------------------------------
// Checkpoint files: magic, version, grid and mesh parameters, eps, alpha, t, step, mode,
// then the field and the background, each as rows, cols and column-major doubles.

namespace {

constexpr char kMagic[8] = {'K', 'I', 'N', 'C', 'K', 'P', 'T', '1'};

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("truncated checkpoint");
    return v;
}

void put_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
    put<std::int64_t>(os, m.rows());
    put<std::int64_t>(os, m.cols());
    os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Eigen::MatrixXd get_matrix(std::istream& is) {
    const auto r = get<std::int64_t>(is);
    const auto c = get<std::int64_t>(is);
    if (r < 0 || c < 0 || r * c > (std::int64_t(1) << 32)) throw std::runtime_error("corrupt checkpoint matrix");
    Eigen::MatrixXd m(r, c);
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!is) throw std::runtime_error("truncated checkpoint");
    return m;
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& c) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(os, Checkpoint::version);
    put<std::int32_t>(os, c.n_per_axis);
    put<double>(os, c.v_max);
    put<std::int32_t>(os, c.n_cells);
    put<double>(os, c.H);
    put<double>(os, c.eps);
    put<double>(os, c.alpha);
    put<double>(os, c.t);
    put<std::int64_t>(os, c.step);
    put<std::int32_t>(os, c.mode == FieldMode::absolute ? 1 : 0);
    put_matrix(os, c.values);
    put_matrix(os, c.background);
    if (!os) throw std::runtime_error("failed writing " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw std::runtime_error("not a checkpoint: " + path);
    if (get<std::uint32_t>(is) != Checkpoint::version) throw std::runtime_error("unsupported checkpoint version");
    Checkpoint c;
    c.n_per_axis = get<std::int32_t>(is);
    c.v_max = get<double>(is);
    c.n_cells = get<std::int32_t>(is);
    c.H = get<double>(is);
    c.eps = get<double>(is);
    c.alpha = get<double>(is);
    c.t = get<double>(is);
    c.step = get<std::int64_t>(is);
    c.mode = get<std::int32_t>(is) == 1 ? FieldMode::absolute : FieldMode::fluctuation;
    c.values = get_matrix(is);
    c.background = get_matrix(is);
    return c;
}

}  // namespace kinetic
