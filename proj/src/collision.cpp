#include "kinetic/collision.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace kinetic {

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const double b = i / std::sqrt(4.0 * i * i - 1.0);
        J(i, i - 1) = b;
        J(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        x[i] = es.eigenvalues()[i];
        const double v0 = es.eigenvectors()(0, i);
        w[i] = 2.0 * v0 * v0;
    }
    // enforce exact symmetry of the rule
    for (int i = 0; i < n / 2; ++i) {
        const double xs = 0.5 * (x[n - 1 - i] - x[i]);
        const double ws = 0.5 * (w[n - 1 - i] + w[i]);
        x[i] = -xs;
        x[n - 1 - i] = xs;
        w[i] = w[n - 1 - i] = ws;
    }
    if (n % 2) x[n / 2] = 0.0;
}

SphereQuadrature lat_long_sphere(int n_theta, int n_phi) {
    if (n_theta < 2 || n_theta % 2 || n_phi < 4 || n_phi % 4)
        throw std::invalid_argument("sphere rule needs even n_theta and n_phi divisible by 4");
    std::vector<double> x, w;
    gauss_legendre(n_theta, x, w);
    SphereQuadrature q;
    const double dphi = 2.0 * std::numbers::pi / n_phi;
    for (int i = n_theta / 2; i < n_theta; ++i) {
        const double ct = x[i];
        const double st = std::sqrt(1.0 - ct * ct);
        for (int j = 0; j < n_phi; ++j) {
            const double ph = (j + 0.5) * dphi;
            q.nodes.emplace_back(st * std::cos(ph), st * std::sin(ph), ct);
            q.weights.push_back(w[i] * dphi);
        }
    }
    const std::size_t m = q.nodes.size();
    for (std::size_t s = 0; s < m; ++s) {
        q.nodes.push_back(-q.nodes[s]);
        q.weights.push_back(q.weights[s]);
    }
    return q;
}

CollisionKernel::CollisionKernel(const VelocityGrid& grid, const CollisionOptions& opt)
    : grid_(&grid), opt_(opt), sphere_(lat_long_sphere(opt.n_theta, opt.n_phi)) {
    const std::size_t N = grid.size();
    if (N * N * sizeof(double) > opt.byte_budget)
        throw std::length_error("collision matrix exceeds the configured byte budget");
    const double mu0 = maxwellian(Vec3::Zero());
    active_.assign(N, 0);
    for (std::size_t u = 0; u < N; ++u) active_[u] = grid.mu[u] >= opt.partner_cut * mu0;

    freq_ = Eigen::MatrixXd::Zero(N, N);
    const int n = grid.n_per_axis;
    const double hvol = grid.h * grid.cell_volume();
    double total = 0.0, dropped = 0.0;
    int lo = 0, hi = n - 1;
    for (std::size_t v = 0; v < N; ++v) {
        const auto ci = grid.coords(static_cast<int>(v));
        for (std::size_t u = 0; u < N; ++u) {
            if (!active_[u] || u == v) continue;
            const auto cj = grid.coords(static_cast<int>(u));
            const double k0 = ci[0] - cj[0], k1 = ci[1] - cj[1], k2 = ci[2] - cj[2];
            const double kn = std::sqrt(k0 * k0 + k1 * k1 + k2 * k2);
            const double m0 = 0.5 * (ci[0] + cj[0]), m1 = 0.5 * (ci[1] + cj[1]), m2 = 0.5 * (ci[2] + cj[2]);
            const double r = 0.5 * kn;
            const double pair = grid.mu[v] * grid.mu[u];
            double gsum = 0.0;
            for (std::size_t s = 0; s < sphere_.half(); ++s) {
                const Vec3& sg = sphere_.nodes[s];
                const double W = 0.5 * kn * hvol * sphere_.weights[s];
                const double pp[3] = {m0 + r * sg[0], m1 + r * sg[1], m2 + r * sg[2]};
                const double pm[3] = {m0 - r * sg[0], m1 - r * sg[1], m2 - r * sg[2]};
                for (int d = 0; d < 3; ++d) {
                    lo = std::min({lo, static_cast<int>(std::floor(pp[d])), static_cast<int>(std::floor(pm[d]))});
                    hi = std::max({hi, static_cast<int>(std::floor(pp[d])) + 1, static_cast<int>(std::floor(pm[d])) + 1});
                }
                total += W * pair;
                if (!inside_hull(pp, n) || !inside_hull(pm, n)) dropped += W * pair;
                gsum += W;
            }
            freq_(v, u) = 2.0 * gsum;
        }
    }
    exit_fraction_ = total > 0.0 ? dropped / total : 0.0;
    ghost_ = std::max(-lo, hi - (n - 1));
    const int np = n + 2 * ghost_;
    // stencil table indexed by (k + n - 1) per axis and half-sphere node
    const int span = 2 * n - 1;
    const std::size_t M2 = sphere_.half();
    geometry_.resize(static_cast<std::size_t>(span) * span * span * M2);
    for (int a = 0; a < span; ++a)
        for (int b = 0; b < span; ++b)
            for (int c = 0; c < span; ++c) {
                const double k[3] = {double(a - n + 1), double(b - n + 1), double(c - n + 1)};
                const double kn = std::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
                for (std::size_t s = 0; s < M2; ++s) {
                    PairGeometry& pg = geometry_[((static_cast<std::size_t>(a) * span + b) * span + c) * M2 + s];
                    const Vec3& sg = sphere_.nodes[s];
                    double tp[3], tm[3];
                    int fp[3], fm[3];
                    for (int d = 0; d < 3; ++d) {
                        const double dp = 0.5 * k[d] + 0.5 * kn * sg[d];
                        const double dm = 0.5 * k[d] - 0.5 * kn * sg[d];
                        fp[d] = static_cast<int>(std::floor(dp));
                        fm[d] = static_cast<int>(std::floor(dm));
                        tp[d] = dp - fp[d];
                        tm[d] = dm - fm[d];
                    }
                    pg.op = (fp[0] * np + fp[1]) * np + fp[2];
                    pg.om = (fm[0] * np + fm[1]) * np + fm[2];
                    auto fill = [](const double* t, double* w) {
                        const double x0 = 1.0 - t[0], x1 = t[0], y0 = 1.0 - t[1], y1 = t[1], z0 = 1.0 - t[2], z1 = t[2];
                        w[0] = x0 * y0 * z0;
                        w[1] = x0 * y0 * z1;
                        w[2] = x0 * y1 * z0;
                        w[3] = x0 * y1 * z1;
                        w[4] = x1 * y0 * z0;
                        w[5] = x1 * y0 * z1;
                        w[6] = x1 * y1 * z0;
                        w[7] = x1 * y1 * z1;
                    };
                    fill(tp, pg.wp);
                    fill(tm, pg.wm);
                    pg.W = 0.5 * kn * hvol * sphere_.weights[s];
                }
            }

    freq_pair_ = freq_;
    for (std::size_t v = 0; v < N; ++v)
        for (std::size_t u = 0; u < N; ++u)
            if (0.25 * grid.nodes[v].squaredNorm() + 0.5 * grid.nodes[u].squaredNorm() > opt.pair_exponent)
                freq_pair_(v, u) = 0.0;
    if (exit_fraction_ > opt.max_exit_fraction)
        throw std::runtime_error("post-collision stencils leave the grid too often (" +
                                 std::to_string(exit_fraction_) + "); increase v_max");
}

namespace {

constexpr int kLane = 8;

// Interpolated values at the two stencils of one collision, weighted product added to sum (kLane columns).
inline void gain_block_same(const double* src, std::size_t bp, const double* wp, std::size_t bm, const double* wm,
                            const std::size_t* off, double f, double* sum) {
    double xp[kLane] = {}, xm[kLane] = {};
    for (int q = 0; q < 8; ++q) {
        const double* rp = src + bp + off[q];
        const double* rm = src + bm + off[q];
        const double a = wp[q], b = wm[q];
        for (int j = 0; j < kLane; ++j) {
            xp[j] += a * rp[j];
            xm[j] += b * rm[j];
        }
    }
    for (int j = 0; j < kLane; ++j) sum[j] += f * xp[j] * xm[j];
}

inline void gain_block_pair(const double* A, const double* B, std::size_t bp, const double* wp, std::size_t bm,
                            const double* wm, const std::size_t* off, double f, double* sum) {
    double ap[kLane] = {}, am[kLane] = {}, bpv[kLane] = {}, bmv[kLane] = {};
    for (int q = 0; q < 8; ++q) {
        const std::size_t op = bp + off[q], om = bm + off[q];
        const double a = wp[q], b = wm[q];
        for (int j = 0; j < kLane; ++j) {
            ap[j] += a * A[op + j];
            am[j] += b * A[om + j];
            bpv[j] += a * B[op + j];
            bmv[j] += b * B[om + j];
        }
    }
    for (int j = 0; j < kLane; ++j) sum[j] += f * (ap[j] * bmv[j] + am[j] * bpv[j]);
}

}  // namespace

void CollisionKernel::gain_ratio(const RowMatrix& a, const RowMatrix& b, RowMatrix& out, bool same,
                                 bool pair_cut) const {
    const VelocityGrid& g = *grid_;
    const int N = static_cast<int>(g.size());
    const int C = static_cast<int>(a.cols());
    if (C > kLane) {
        // column chunks keep the padded buffers cache resident
        out.resize(N, C);
        RowMatrix part;
        for (int c0 = 0; c0 < C; c0 += kLane) {
            const int w = std::min(kLane, C - c0);
            const RowMatrix ac = a.middleCols(c0, w);
            const RowMatrix bc = same ? ac : RowMatrix(b.middleCols(c0, w));
            gain_ratio(ac, bc, part, same, pair_cut);
            out.middleCols(c0, w) = part;
        }
        return;
    }
    const int CP = kLane;
    const int n = g.n_per_axis;
    const int gw = ghost_;
    const int np = n + 2 * gw;
    const int span = 2 * n - 1;
    const std::size_t M2 = sphere_.half();
    int off_i[8];
    stencil_offsets(np, off_i);
    std::size_t off[8];
    for (int q = 0; q < 8; ++q) off[q] = static_cast<std::size_t>(off_i[q]) * CP;

    const std::size_t NP = static_cast<std::size_t>(np) * np * np;
    auto pad = [&](const RowMatrix& m, std::vector<double>& buf) {
        buf.assign(NP * CP, 0.0);
        for (int x = 0; x < np; ++x)
            for (int y = 0; y < np; ++y)
                for (int z = 0; z < np; ++z) {
                    const int src = (std::clamp(x - gw, 0, n - 1) * n + std::clamp(y - gw, 0, n - 1)) * n +
                                    std::clamp(z - gw, 0, n - 1);
                    double* dst = buf.data() + ((static_cast<std::size_t>(x) * np + y) * np + z) * CP;
                    for (int c = 0; c < C; ++c) dst[c] = m(src, c);
                }
    };
    std::vector<double> Abuf, Bbuf, Obuf(static_cast<std::size_t>(N) * CP, 0.0);
    pad(a, Abuf);
    if (!same) pad(b, Bbuf);
    const double* A = Abuf.data();
    const double* B = same ? A : Bbuf.data();

    std::vector<double> qv(N), qu(N);
    for (int i = 0; i < N; ++i) {
        qv[i] = 0.25 * g.nodes[i].squaredNorm();
        qu[i] = 0.5 * g.nodes[i].squaredNorm();
    }
    // v' and u' are the same points for (v,u) and (u,v), so each unordered pair is visited once
    auto keep = [&](int v, int u) {
        return active_[u] && !(pair_cut && qv[v] + qu[u] > opt_.pair_exponent);
    };
    const double fs = same ? 2.0 : 1.0;
    for (int k0 = 0; k0 < n; ++k0)
        for (int k1 = k0 == 0 ? 0 : 1 - n; k1 < n; ++k1)
            for (int k2 = (k0 == 0 && k1 == 0) ? 1 : 1 - n; k2 < n; ++k2) {
                const int kidx = ((k0 + n - 1) * span + (k1 + n - 1)) * span + (k2 + n - 1);
                const PairGeometry* geo = geometry_.data() + static_cast<std::size_t>(kidx) * M2;
                for (int i0 = std::max(0, k0); i0 < std::min(n, n + k0); ++i0)
                    for (int i1 = std::max(0, k1); i1 < std::min(n, n + k1); ++i1)
                        for (int i2 = std::max(0, k2); i2 < std::min(n, n + k2); ++i2) {
                            const int j0 = i0 - k0, j1 = i1 - k1, j2 = i2 - k2;
                            const int v = (i0 * n + i1) * n + i2;
                            const int u = (j0 * n + j1) * n + j2;
                            const bool kv = keep(v, u), ku = keep(u, v);
                            if (!kv && !ku) continue;
                            const std::size_t up = ((static_cast<std::size_t>(j0 + gw) * np + j1 + gw) * np + j2 + gw);
                            double sum[kLane] = {};
                            for (std::size_t s = 0; s < M2; ++s) {
                                const PairGeometry& pg = geo[s];
                                const std::size_t bp_idx = (up + pg.op) * CP, bm_idx = (up + pg.om) * CP;
                                if (same)
                                    gain_block_same(A, bp_idx, pg.wp, bm_idx, pg.wm, off, pg.W, sum);
                                else
                                    gain_block_pair(A, B, bp_idx, pg.wp, bm_idx, pg.wm, off, pg.W, sum);
                            }
                            if (kv) {
                                double* acc = Obuf.data() + static_cast<std::size_t>(v) * CP;
                                const double f = fs * g.mu[u];
                                for (int j = 0; j < kLane; ++j) acc[j] += f * sum[j];
                            }
                            if (ku) {
                                double* acc = Obuf.data() + static_cast<std::size_t>(u) * CP;
                                const double f = fs * g.mu[v];
                                for (int j = 0; j < kLane; ++j) acc[j] += f * sum[j];
                            }
                        }
            }
    out.resize(N, C);
    for (int i = 0; i < N; ++i)
        for (int c = 0; c < C; ++c) out(i, c) = Obuf[static_cast<std::size_t>(i) * CP + c];
}

Eigen::MatrixXd CollisionKernel::linearized_ratio_matrix() const {
    const VelocityGrid& g = *grid_;
    const int N = static_cast<int>(g.size());
    const int n = g.n_per_axis;
    int off[8], off27[27];
    stencil_offsets(n, off);
    stencil_offsets27(n, off27);
    const bool quad = opt_.linear_order == 2;
    // row-major accumulation, transposed at the end
    Eigen::MatrixXd At = Eigen::MatrixXd::Zero(N, N);
    for (int v = 0; v < N; ++v) {
        double* col = At.data() + static_cast<std::size_t>(v) * N;
        double nu = 0.0;
        for (int u = 0; u < N; ++u) {
            const double gm = freq_(v, u) * g.mu[u];
            nu += gm;
            col[u] += gm;
        }
        col[v] += nu;
        for_each_collision(v, [&](int u, double W, const double* pp, const double* pm) {
            const double c = 2.0 * W * g.mu[u];
            if (quad) {
                const Stencil27 sp = make_stencil27(pp, n);
                const Stencil27 sm = make_stencil27(pm, n);
                for (int q = 0; q < 27; ++q) {
                    col[sp.base + off27[q]] -= c * sp.w[q];
                    col[sm.base + off27[q]] -= c * sm.w[q];
                }
            } else {
                const Stencil sp = make_stencil(pp, n);
                const Stencil sm = make_stencil(pm, n);
                for (int q = 0; q < 8; ++q) {
                    col[sp.base + off[q]] -= c * sp.w[q];
                    col[sm.base + off[q]] -= c * sm.w[q];
                }
            }
        });
    }
    At.transposeInPlace();
    return At;
}

Eigen::MatrixXd collision_invariants(const VelocityGrid& grid) {
    const std::size_t N = grid.size();
    Eigen::MatrixXd X(N, 5);
    for (std::size_t i = 0; i < N; ++i) {
        const Vec3& v = grid.nodes[i];
        const double s = grid.sqrt_mu[i];
        X(i, 0) = s;
        X(i, 1) = v[0] * s;
        X(i, 2) = v[1] * s;
        X(i, 3) = v[2] * s;
        X(i, 4) = 0.5 * (v.squaredNorm() - 3.0) * s;
    }
    return X;
}

namespace {

Eigen::MatrixXd orthonormal_invariants(const VelocityGrid& grid) {
    Eigen::MatrixXd X = collision_invariants(grid);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    return qr.householderQ() * Eigen::MatrixXd::Identity(X.rows(), 5);
}

RowMatrix as_column(const VelocityFunction& f) {
    RowMatrix m(f.size(), 1);
    m.col(0) = f;
    return m;
}

}  // namespace

VelocityFunction q_full(const CollisionKernel& ker, const VelocityFunction& F, const VelocityFunction& G) {
    const VelocityGrid& g = ker.grid();
    RowMatrix a = as_column(F.cwiseQuotient(g.mu));
    RowMatrix b = as_column(G.cwiseQuotient(g.mu));
    RowMatrix gain;
    ker.gain_ratio(a, b, gain, false);
    VelocityFunction loss = F.cwiseProduct(ker.frequency_matrix() * G);
    return g.mu.cwiseProduct(gain.col(0)) - loss;
}

CollisionMatrices build_matrices(const CollisionKernel& ker) {
    const VelocityGrid& g = ker.grid();
    const int N = static_cast<int>(g.size());
    CollisionMatrices m;
    m.omega_nodes = ker.sphere();
    m.exit_fraction = ker.exit_fraction();
    m.nu = ker.frequency_matrix() * g.mu;

    Eigen::MatrixXd L = ker.linearized_ratio_matrix();
    for (int w = 0; w < N; ++w) {
        const double sw = 1.0 / g.sqrt_mu[w];
        for (int v = 0; v < N; ++v) L(v, w) *= g.sqrt_mu[v] * sw;
    }

    const double lmax = L.cwiseAbs().maxCoeff();
    m.raw_asymmetry = (L - L.transpose()).cwiseAbs().maxCoeff() / lmax;
    {
        Eigen::MatrixXd X = collision_invariants(g);
        double worst = 0.0;
        for (int c = 0; c < 5; ++c) {
            const VelocityFunction r = L * X.col(c);
            const double scale = m.nu.cwiseProduct(X.col(c)).cwiseAbs().maxCoeff();
            worst = std::max(worst, r.cwiseAbs().maxCoeff() / scale);
        }
        m.raw_null_residual = worst;
    }

    // average over the eight axis reflections, then symmetrise
    std::vector<std::vector<int>> refl(8, std::vector<int>(N));
    for (unsigned mask = 0; mask < 8; ++mask)
        for (int i = 0; i < N; ++i) refl[mask][i] = g.reflect(i, mask);
    Eigen::MatrixXd S(N, N);
    for (int w = 0; w < N; ++w)
        for (int v = 0; v < N; ++v) {
            double s = 0.0;
            for (unsigned mask = 0; mask < 8; ++mask) s += L(refl[mask][v], refl[mask][w]);
            S(v, w) = 0.125 * s;
        }
    L.resize(0, 0);
    for (int w = 0; w < N; ++w)
        for (int v = 0; v < w; ++v) {
            const double a = 0.5 * (S(v, w) + S(w, v));
            S(v, w) = a;
            S(w, v) = a;
        }

    // restrict to the orthogonal complement of the invariants
    m.invariants = orthonormal_invariants(g);
    const Eigen::MatrixXd& Q = m.invariants;
    const Eigen::MatrixXd Y = S * Q;
    const Eigen::MatrixXd QtY = Q.transpose() * Y;
    S.noalias() -= Q * Y.transpose();
    S.noalias() -= Y * Q.transpose();
    S.noalias() += Q * (QtY * Q.transpose());
    for (int w = 0; w < N; ++w)
        for (int v = 0; v < w; ++v) {
            const double a = 0.5 * (S(v, w) + S(w, v));
            S(v, w) = a;
            S(w, v) = a;
        }

    m.K = -S;
    m.K.diagonal() += m.nu;
    const double kasym = (m.K - m.K.transpose()).cwiseAbs().maxCoeff() / m.K.cwiseAbs().maxCoeff();
    if (kasym > ker.options().tau_K) throw std::runtime_error("K is not symmetric within tau_K");
    return m;
}

VelocityFunction apply_L(const CollisionMatrices& mats, const VelocityFunction& f) {
    return mats.nu.cwiseProduct(f) - mats.K * f;
}

RowMatrix gamma_batch(const CollisionKernel& ker, const RowMatrix& f, const RowMatrix* g) {
    const VelocityGrid& grid = ker.grid();
    const Eigen::VectorXd inv_sqrt = grid.sqrt_mu.cwiseInverse();
    RowMatrix pf = inv_sqrt.asDiagonal() * f;
    RowMatrix gain;
    const Eigen::MatrixXd& G = ker.pair_frequency_matrix();
    if (!g) {
        ker.gain_ratio(pf, pf, gain, true, true);
        RowMatrix sf = grid.sqrt_mu.asDiagonal() * f;
        RowMatrix loss = f.cwiseProduct(G * sf);
        return RowMatrix(grid.sqrt_mu.asDiagonal() * gain) - loss;
    }
    RowMatrix pg = inv_sqrt.asDiagonal() * (*g);
    ker.gain_ratio(pf, pg, gain, false, true);
    RowMatrix sf = grid.sqrt_mu.asDiagonal() * f;
    RowMatrix sg = grid.sqrt_mu.asDiagonal() * (*g);
    RowMatrix loss = 0.5 * (f.cwiseProduct(G * sg) + g->cwiseProduct(G * sf));
    return RowMatrix(grid.sqrt_mu.asDiagonal() * gain) - loss;
}

VelocityFunction apply_Gamma(const CollisionKernel& ker, const VelocityFunction& f, const VelocityFunction& g) {
    RowMatrix F = as_column(f), G = as_column(g);
    return gamma_batch(ker, F, &G).col(0);
}

void gain_loss_batch(const CollisionKernel& ker, const RowMatrix& F, RowMatrix& gain, RowMatrix& nuF) {
    const VelocityGrid& grid = ker.grid();
    RowMatrix a = grid.mu.cwiseInverse().asDiagonal() * F;
    RowMatrix raw;
    ker.gain_ratio(a, a, raw, true, true);
    gain = grid.mu.asDiagonal() * raw;
    nuF = ker.pair_frequency_matrix() * F;
}

namespace {

// Conjugate gradients for the symmetric operator restricted to the complement of the invariants,
// Jacobi-preconditioned with nu.
VelocityFunction projected_cg(const CollisionMatrices& m, const VelocityFunction& rhs, double tol, int& iters) {
    const Eigen::MatrixXd& Q = m.invariants;
    auto project = [&](const VelocityFunction& x) -> VelocityFunction { return x - Q * (Q.transpose() * x); };
    auto op = [&](const VelocityFunction& x) -> VelocityFunction { return project(apply_L(m, x)); };
    const VelocityFunction b = project(rhs);
    VelocityFunction x = VelocityFunction::Zero(b.size());
    VelocityFunction r = b;
    auto precond = [&](const VelocityFunction& y) -> VelocityFunction { return project(y.cwiseQuotient(m.nu)); };
    VelocityFunction z = precond(r);
    VelocityFunction p = z;
    double rz = r.dot(z);
    const double bn = b.norm();
    iters = 0;
    const int max_it = 10 * static_cast<int>(b.size());
    while (r.norm() > tol * bn && iters < max_it) {
        const VelocityFunction Ap = op(p);
        const double pAp = p.dot(Ap);
        if (!(pAp > 0.0)) throw std::runtime_error("projected collision operator is not positive definite");
        const double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        z = precond(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        ++iters;
    }
    if (r.norm() > tol * bn) throw std::runtime_error("transport coefficient solve did not converge");
    return project(x);
}

}  // namespace

TransportCoefficients transport_coefficients(const CollisionMatrices& mats, const VelocityGrid& grid, double tol) {
    const std::size_t N = grid.size();
    VelocityFunction A(N), B(N);
    for (std::size_t i = 0; i < N; ++i) {
        const Vec3& v = grid.nodes[i];
        A[i] = v[0] * 0.5 * (v.squaredNorm() - 5.0) * grid.sqrt_mu[i];
        B[i] = v[0] * v[1] * grid.sqrt_mu[i];
    }
    TransportCoefficients tc;
    const VelocityFunction xa = projected_cg(mats, A, tol, tc.iterations_kappa);
    const VelocityFunction xb = projected_cg(mats, B, tol, tc.iterations_sigma);
    const double vol = grid.cell_volume();
    tc.kappa = 0.4 * vol * A.dot(xa);
    tc.sigma = vol * B.dot(xb);
    if (!(tc.sigma > 0.0) || !(tc.kappa > 0.0)) throw std::runtime_error("non-positive transport coefficient");
    return tc;
}

}  // namespace kinetic
