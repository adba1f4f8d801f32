#pragma once

// Small dense conic-programming layer: a builder for problems mixing
// nonnegative scalars, free scalars and PSD matrix blocks under linear
// equality/inequality rows, compiled to the standard form
//
//     min c'x   s.t.  A x = b,  x in (R+^l) x (PSD blocks, svec'd)
//
// and solved with a homogeneous self-dual interior-point method using
// Nesterov-Todd scaling and a Mehrotra predictor-corrector. Problems here
// are tiny (tens of rows, block dims < 20), so everything is dense except
// the constraint rows, which are kept as sparse triplets to make the Schur
// complement assembly cheap.

#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wpmr/linalg.hpp"

namespace wpmr {

// ---------------------------------------------------------------------------
// Symmetric vectorization: lower triangle, column major, off-diagonals
// multiplied by sqrt(2) so that <svec(X), svec(Y)> = Tr(X Y).

inline int svec_len(int n) { return n * (n + 1) / 2; }

inline int svec_index(int n, int i, int j) {
    if (j > i) std::swap(i, j);
    return j * (2 * n - j + 1) / 2 + (i - j);
}

inline RVec svec(const RMat& x) {
    const int n = x.rows();
    RVec v(svec_len(n));
    const double rt2 = std::sqrt(2.0);
    int k = 0;
    for (int j = 0; j < n; ++j) {
        v[k++] = x(j, j);
        for (int i = j + 1; i < n; ++i) v[k++] = rt2 * 0.5 * (x(i, j) + x(j, i));
    }
    return v;
}

inline RMat smat(int n, const double* v) {
    RMat x(n, n);
    const double inv_rt2 = 1.0 / std::sqrt(2.0);
    int k = 0;
    for (int j = 0; j < n; ++j) {
        x(j, j) = v[k++];
        for (int i = j + 1; i < n; ++i) {
            const double val = v[k++] * inv_rt2;
            x(i, j) = val;
            x(j, i) = val;
        }
    }
    return x;
}

// ---------------------------------------------------------------------------

enum class SolveStatus {
    optimal,
    primal_infeasible,
    dual_infeasible,
    max_iterations,
    numerical_trouble,
};

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::primal_infeasible: return "primal_infeasible";
        case SolveStatus::dual_infeasible: return "dual_infeasible";
        case SolveStatus::max_iterations: return "max_iterations";
        case SolveStatus::numerical_trouble: return "numerical_trouble";
    }
    return "unknown";
}

struct SolverOptions {
    int max_iterations = 100;
    double tolerance = 1e-8;          // feasibility residuals and relative gap
    double stall_tolerance = 1e-7;    // accepted when progress floors out early
    double infeas_tolerance = 1e-8;   // certificate quality
    double step_fraction = 0.99;      // fraction-to-boundary damping
    int refinement_passes = 2;        // iterative refinement of search directions
    bool dump_standard_form = false;  // write the compiled problem to dump_path
    std::string dump_path = "standard_form.txt";
};

struct KktResiduals {
    double primal = 0.0;  // ||Ax - b||_inf / (1 + ||b||_inf)
    double dual = 0.0;    // ||A'y + s - c||_inf / (1 + ||c||_inf)
    double gap = 0.0;     // |c'x - b'y| / (1 + |c'x| + |b'y|)
    double cone = 0.0;    // most negative eigenvalue / entry across x and s
    double max_residual() const { return std::max({primal, dual, gap, cone}); }
};

struct StandardForm {
    int nl = 0;               // leading nonnegative columns
    std::vector<int> sdims;   // PSD block dimensions, svec'd after the nonnegs
    int ncols = 0;
    std::vector<std::vector<std::pair<int, double>>> rows;  // sparse A
    RVec b, c;

    int block_offset(int blk) const {
        int off = nl;
        for (int t = 0; t < blk; ++t) off += svec_len(sdims[t]);
        return off;
    }
    double barrier_degree() const {
        double nu = nl;
        for (int d : sdims) nu += d;
        return nu;
    }
};

// Independent recomputation of optimality residuals from raw data. Residuals
// are relative to the magnitudes entering the subtraction, the usual
// convention for conic solvers.
inline KktResiduals kkt_residuals(const StandardForm& sf, const RVec& x, const RVec& y,
                                  const RVec& s) {
    KktResiduals r;
    const int m = static_cast<int>(sf.rows.size());
    double berr = 0.0, axmax = 0.0;
    for (int i = 0; i < m; ++i) {
        double ax = 0.0;
        for (const auto& [j, v] : sf.rows[i]) ax += v * x[j];
        axmax = std::max(axmax, std::abs(ax));
        berr = std::max(berr, std::abs(ax - sf.b[i]));
    }
    r.primal = berr / (1.0 + std::max(norm_inf(sf.b), axmax));
    RVec aty(sf.ncols, 0.0);
    for (int i = 0; i < m; ++i)
        for (const auto& [j, v] : sf.rows[i]) aty[j] += v * y[i];
    double derr = 0.0;
    for (int j = 0; j < sf.ncols; ++j)
        derr = std::max(derr, std::abs(aty[j] + s[j] - sf.c[j]));
    r.dual = derr / (1.0 + std::max({norm_inf(sf.c), norm_inf(aty), norm_inf(s)}));
    const double pobj = dot(sf.c, x), dobj = dot(sf.b, y);
    r.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    double viol = 0.0;
    for (int j = 0; j < sf.nl; ++j) viol = std::max({viol, -x[j], -s[j]});
    int off = sf.nl;
    for (int d : sf.sdims) {
        const RMat xm = smat(d, x.data() + off), sm = smat(d, s.data() + off);
        viol = std::max(viol, -eig_symmetric(xm).values.front());
        viol = std::max(viol, -eig_symmetric(sm).values.front());
        off += svec_len(d);
    }
    r.cone = viol;
    return r;
}

// ---------------------------------------------------------------------------
// Homogeneous self-dual solver on the compiled standard form.

struct HsdResult {
    SolveStatus status = SolveStatus::numerical_trouble;
    RVec x, y, s;   // de-homogenized, in the original (unequilibrated) space;
                    // x and (y, s) may come from different iterations
    double tau = 0.0, kappa = 0.0;
    int iterations = 0;
    double primal_res = 0.0, dual_res = 0.0, rel_gap = 0.0;
};

namespace detail {

struct NtScaling {
    // Nonnegative part.
    RVec w2, lam;  // w2[i] = x[i]/s[i], lam[i] = sqrt(x[i] s[i])
    // One entry per PSD block.
    std::vector<RMat> wm;    // symmetric scaling matrix W
    std::vector<RMat> g;     // W = G G', scaled iterate G^{-1} X G^{-T} = diag(sig)
    std::vector<RMat> ginv;
    std::vector<RVec> sig;
    bool ok = false;
};

inline RMat lower_inverse(const RMat& l) {
    RMat inv = RMat::identity(l.rows());
    solve_lower_mat(l, inv);
    return inv;
}

// Builds the NT scaling for the current iterate; false when a Cholesky
// breaks down (iterate touched the boundary numerically).
inline bool make_scaling(const StandardForm& sf, const RVec& x, const RVec& s,
                         NtScaling& nt) {
    nt.w2.assign(sf.nl, 0.0);
    nt.lam.assign(sf.nl, 0.0);
    for (int i = 0; i < sf.nl; ++i) {
        if (x[i] <= 0.0 || s[i] <= 0.0) return false;
        nt.w2[i] = x[i] / s[i];
        nt.lam[i] = std::sqrt(x[i] * s[i]);
    }
    const int nb = static_cast<int>(sf.sdims.size());
    nt.wm.assign(nb, RMat());
    nt.g.assign(nb, RMat());
    nt.ginv.assign(nb, RMat());
    nt.sig.assign(nb, RVec());
    int off = sf.nl;
    for (int bidx = 0; bidx < nb; ++bidx) {
        const int d = sf.sdims[bidx];
        const RMat xm = smat(d, x.data() + off), sm = smat(d, s.data() + off);
        RMat lx, ls;
        if (!cholesky(xm, lx) || !cholesky(sm, ls)) return false;
        const SvdResult sv = jacobi_svd(ls.transposed() * lx);
        for (double v : sv.sigma)
            if (v <= 0.0) return false;
        // G = Lx V Sigma^{-1/2}; then G^{-1} X G^{-T} = G' S G = Sigma.
        RMat gm(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double acc = 0.0;
                for (int k = 0; k < d; ++k) acc += lx(i, k) * sv.v(k, j);
                gm(i, j) = acc / std::sqrt(sv.sigma[j]);
            }
        const RMat lxinv = lower_inverse(lx);
        RMat gi(d, d);  // Sigma^{1/2} V' Lx^{-1}
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double acc = 0.0;
                for (int k = 0; k < d; ++k) acc += sv.v(k, i) * lxinv(k, j);
                gi(i, j) = acc * std::sqrt(sv.sigma[i]);
            }
        nt.g[bidx] = gm;
        nt.ginv[bidx] = gi;
        RMat w = gm * gm.transposed();
        w.symmetrize();
        nt.wm[bidx] = std::move(w);
        nt.sig[bidx] = sv.sigma;
        off += svec_len(d);
    }
    nt.ok = true;
    return true;
}

// v -> W^2 v, i.e. the NT quadratic-representation sandwich per block.
inline RVec apply_w2(const StandardForm& sf, const NtScaling& nt, const RVec& v) {
    RVec out(sf.ncols, 0.0);
    for (int i = 0; i < sf.nl; ++i) out[i] = nt.w2[i] * v[i];
    int off = sf.nl;
    for (size_t bidx = 0; bidx < sf.sdims.size(); ++bidx) {
        const int d = sf.sdims[bidx];
        RMat vm = smat(d, v.data() + off);
        RMat r = nt.wm[bidx] * vm * nt.wm[bidx];
        r.symmetrize();
        const RVec rv = svec(r);
        std::copy(rv.begin(), rv.end(), out.begin() + off);
        off += svec_len(d);
    }
    return out;
}

// Largest alpha with v + alpha dv staying in the cone, capped at `cap`.
inline double max_cone_step(const StandardForm& sf, const RVec& v, const RVec& dv,
                            double cap) {
    double alpha = cap;
    for (int i = 0; i < sf.nl; ++i)
        if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
    int off = sf.nl;
    for (int d : sf.sdims) {
        const RMat vm = smat(d, v.data() + off), dm = smat(d, dv.data() + off);
        RMat l;
        if (!cholesky(vm, l)) return 0.0;
        RMat inner = dm;           // L^{-1} D L^{-T}
        solve_lower_mat(l, inner); // L^{-1} D
        RMat t = inner.transposed();
        solve_lower_mat(l, t);     // L^{-1} D' L^{-T} ... symmetric overall
        t.symmetrize();
        const double lmin = eig_symmetric(t).values.front();
        if (lmin < 0.0) alpha = std::min(alpha, -1.0 / lmin);
        off += svec_len(d);
    }
    return alpha;
}

struct Direction {
    RVec dx, dy, ds;
    double dtau = 0.0, dkappa = 0.0;
};

}  // namespace detail

// Maps iterates of the equilibrated problem back to the user's data so that
// convergence can be judged where it matters.
struct UnscaleInfo {
    const StandardForm* original = nullptr;
    RVec dr, dc;
    double sb = 1.0, sc = 1.0;
};

class HsdSolver {
public:
    HsdSolver(StandardForm sf, SolverOptions opt, UnscaleInfo unscale = {})
        : sf_(std::move(sf)), opt_(std::move(opt)), un_(std::move(unscale)) {}

    HsdResult solve() {
        const int m = static_cast<int>(sf_.rows.size());
        const double nu = sf_.barrier_degree();
        x_ = cone_identity();
        s_ = x_;
        y_.assign(m, 0.0);
        tau_ = 1.0;
        kappa_ = 1.0;

        // The primal and dual halves are tracked separately: near the
        // numerical floor one Newton step often improves dual feasibility
        // while damaging primal feasibility (or vice versa), and a pair taken
        // across iterations is still a valid primal-dual certificate.  A half
        // is only swapped in when doing so improves the combined metric of
        // the pair, so a feasible but far-from-optimal early iterate cannot
        // pin the reported objective.
        HsdResult best;
        best.x.assign(sf_.ncols, 0.0);
        best.y.assign(m, 0.0);
        best.s.assign(sf_.ncols, 0.0);
        double best_pres = std::numeric_limits<double>::infinity();
        double best_dres = std::numeric_limits<double>::infinity();
        double best_pobj = 0.0, best_dobj = 0.0;
        double best_metric = std::numeric_limits<double>::infinity();
        int tiny_steps = 0;
        int no_improve = 0;

        for (int iter = 0; iter <= opt_.max_iterations; ++iter) {
            // Residuals of the self-dual system.
            RVec rx = residual_dual();      // -A'y + c tau - s
            RVec ry = residual_primal();    // A x - b tau
            const double rtau = dot(sf_.b, y_) - dot(sf_.c, x_) - kappa_;

            // Convergence is judged on the caller's original data: residuals
            // that look converged after equilibration can still be sloppy
            // once the scaling is undone.
            const OrigEval ev = evaluate_original();
            auto gap_of = [](double po, double dobj) {
                return std::abs(po - dobj) / (1.0 + std::abs(po) + std::abs(dobj));
            };
            auto combined = [&] {
                return std::max({best_pres, best_dres, gap_of(best_pobj, best_dobj)});
            };
            auto accept_primal = [&] {
                best_pres = ev.pres;
                best_pobj = ev.pobj;
                best.x = ev.xo;
                best.tau = tau_;
            };
            auto accept_dual = [&] {
                best_dres = ev.dres;
                best_dobj = ev.dobj;
                best.y = ev.yo;
                best.s = ev.so;
                best.kappa = kappa_;
            };
            if (iter == 0) {
                accept_primal();
                accept_dual();
            } else {
                // Replace either half (or both) only when the pair improves.
                if (std::max({ev.pres, ev.dres, gap_of(ev.pobj, ev.dobj)}) < combined()) {
                    accept_primal();
                    accept_dual();
                }
                if (std::max({ev.pres, best_dres, gap_of(ev.pobj, best_dobj)}) <
                    combined())
                    accept_primal();
                if (std::max({best_pres, ev.dres, gap_of(best_pobj, ev.dobj)}) <
                    combined())
                    accept_dual();
            }
            const double relgap = gap_of(best_pobj, best_dobj);
            const double metric = combined();
            best.iterations = iter;
            best.primal_res = best_pres;
            best.dual_res = best_dres;
            best.rel_gap = relgap;
            if (metric < best_metric) {
                best_metric = metric;
                no_improve = 0;
            } else {
                ++no_improve;
            }
            logf(LogLevel::debug, "hsd it=%d mu=%.3e pres=%.3e dres=%.3e gap=%.3e tau=%.3e",
                 iter, (dot(x_, s_) + tau_ * kappa_) / (nu + 1.0), ev.pres, ev.dres,
                 relgap, tau_);

            if (metric <= opt_.tolerance) {
                best.status = SolveStatus::optimal;
                return best;
            }
            if (SolveStatus cert = check_certificates(); cert != SolveStatus::optimal) {
                best.status = cert;
                return best;
            }
            const double mu = (dot(x_, s_) + tau_ * kappa_) / (nu + 1.0);
            if (tau_ < 1e-10 * std::max(1.0, kappa_) || mu < 1e-16 || tiny_steps >= 3 ||
                no_improve >= 6 || metric > 1e3 * best_metric ||
                iter == opt_.max_iterations) {
                best.status = stalled_status(best_metric,
                                             iter >= opt_.max_iterations
                                                 ? SolveStatus::max_iterations
                                                 : SolveStatus::numerical_trouble);
                return best;
            }

            detail::NtScaling nt;
            if (!detail::make_scaling(sf_, x_, s_, nt) || !build_schur(nt)) {
                // The iterate hit the cone boundary numerically; keep the
                // best point if it already meets the relaxed tolerance.
                best.status =
                    stalled_status(best_metric, SolveStatus::numerical_trouble);
                return best;
            }

            // Predictor: pure Newton on the residuals with target 0.
            RVec bs_aff = scaled_complementarity_target(nt, 0.0, nullptr, nullptr);
            detail::Direction aff = solve_direction(nt, rx, ry, rtau, bs_aff,
                                                    -tau_ * kappa_, 1.0);
            const double alpha_aff = step_length(aff, 1.0);
            const double mu_aff = predicted_mu(aff, alpha_aff, nu);
            double sigma = std::pow(mu_aff / mu, 3.0);
            sigma = std::min(1.0, std::max(0.0, sigma));

            // Corrector: recentre and compensate the second-order term.
            RVec bs_cmb =
                scaled_complementarity_target(nt, sigma * mu, &aff.dx, &aff.ds);
            const double bk_cmb =
                sigma * mu - tau_ * kappa_ - aff.dtau * aff.dkappa;
            detail::Direction dir = solve_direction(nt, rx, ry, rtau, bs_cmb, bk_cmb,
                                                    1.0 - sigma);

            double alpha = opt_.step_fraction * step_length(dir, 1.0 / opt_.step_fraction);
            alpha = std::min(1.0, alpha);
            if (alpha < 1e-7) {
                ++tiny_steps;
            } else {
                tiny_steps = 0;
            }
            take_step(dir, alpha);
        }
        return best;  // unreachable
    }

private:
    RVec cone_identity() const {
        RVec e(sf_.ncols, 0.0);
        for (int i = 0; i < sf_.nl; ++i) e[i] = 1.0;
        int off = sf_.nl;
        for (int d : sf_.sdims) {
            for (int j = 0; j < d; ++j) e[off + svec_index(d, j, j)] = 1.0;
            off += svec_len(d);
        }
        return e;
    }

    RVec residual_dual() const {  // -A'y + c tau - s
        RVec r(sf_.ncols);
        for (int j = 0; j < sf_.ncols; ++j) r[j] = sf_.c[j] * tau_ - s_[j];
        for (size_t i = 0; i < sf_.rows.size(); ++i)
            for (const auto& [j, v] : sf_.rows[i]) r[j] -= v * y_[i];
        return r;
    }

    RVec residual_primal() const {  // A x - b tau
        RVec r(sf_.rows.size());
        for (size_t i = 0; i < sf_.rows.size(); ++i) {
            double ax = 0.0;
            for (const auto& [j, v] : sf_.rows[i]) ax += v * x_[j];
            r[i] = ax - sf_.b[i] * tau_;
        }
        return r;
    }

    struct OrigEval {
        double pres = 0.0, dres = 0.0;
        double pobj = 0.0, dobj = 0.0;
        RVec xo, yo, so;
    };

    // De-homogenizes the iterate and measures feasibility against the
    // unequilibrated data, with residuals relative to the magnitudes that
    // enter each subtraction.
    OrigEval evaluate_original() const {
        const StandardForm& o = un_.original ? *un_.original : sf_;
        const bool scaled = un_.original != nullptr;
        const int m = static_cast<int>(o.rows.size());
        OrigEval ev;
        ev.xo.resize(o.ncols);
        ev.so.resize(o.ncols);
        ev.yo.resize(m);
        for (int j = 0; j < o.ncols; ++j) {
            const double dcj = scaled ? un_.dc[j] : 1.0;
            ev.xo[j] = dcj * x_[j] / (un_.sb * tau_);
            ev.so[j] = s_[j] / (dcj * un_.sc * tau_);
        }
        for (int i = 0; i < m; ++i)
            ev.yo[i] = (scaled ? un_.dr[i] : 1.0) * y_[i] / (un_.sc * tau_);
        double p = 0.0, axmax = 0.0;
        for (int i = 0; i < m; ++i) {
            double ax = 0.0;
            for (const auto& [j, v] : o.rows[i]) ax += v * ev.xo[j];
            axmax = std::max(axmax, std::abs(ax));
            p = std::max(p, std::abs(ax - o.b[i]));
        }
        ev.pres = p / (1.0 + std::max(norm_inf(o.b), axmax));
        RVec aty(o.ncols, 0.0);
        for (int i = 0; i < m; ++i)
            for (const auto& [j, v] : o.rows[i]) aty[j] += v * ev.yo[i];
        double d = 0.0;
        for (int j = 0; j < o.ncols; ++j)
            d = std::max(d, std::abs(aty[j] + ev.so[j] - o.c[j]));
        ev.dres =
            d / (1.0 + std::max({norm_inf(o.c), norm_inf(aty), norm_inf(ev.so)}));
        ev.pobj = dot(o.c, ev.xo);
        ev.dobj = dot(o.b, ev.yo);
        return ev;
    }

    SolveStatus check_certificates() const {
        const double by = dot(sf_.b, y_);
        if (by > 0.0) {
            // y/by is a Farkas certificate when A'y + s = 0 holds well enough.
            double viol = 0.0;
            RVec aty(sf_.ncols, 0.0);
            for (size_t i = 0; i < sf_.rows.size(); ++i)
                for (const auto& [j, v] : sf_.rows[i]) aty[j] += v * y_[i];
            for (int j = 0; j < sf_.ncols; ++j)
                viol = std::max(viol, std::abs(aty[j] + s_[j]));
            if (viol / by <= opt_.infeas_tolerance * (1.0 + norm_inf(y_) / by))
                return SolveStatus::primal_infeasible;
        }
        const double cx = -dot(sf_.c, x_);
        if (cx > 0.0) {
            double viol = 0.0;
            for (size_t i = 0; i < sf_.rows.size(); ++i) {
                double ax = 0.0;
                for (const auto& [j, v] : sf_.rows[i]) ax += v * x_[j];
                viol = std::max(viol, std::abs(ax));
            }
            if (viol / cx <= opt_.infeas_tolerance * (1.0 + norm_inf(x_) / cx))
                return SolveStatus::dual_infeasible;
        }
        return SolveStatus::optimal;  // used as "no certificate"
    }

    SolveStatus stalled_status(double best_metric, SolveStatus fallback) const {
        if (best_metric <= opt_.tolerance) return SolveStatus::optimal;
        if (best_metric <= opt_.stall_tolerance) {
            logf(LogLevel::debug, "hsd: accepting stalled iterate at %.3e", best_metric);
            return SolveStatus::optimal;
        }
        return fallback;
    }

    // Schur complement M = A W^2 A' (plus tiny diagonal lift if needed),
    // stored as its Cholesky factor; also caches z_i = W^2 a_i.
    bool build_schur(const detail::NtScaling& nt) {
        const int m = static_cast<int>(sf_.rows.size());
        zrows_.assign(m, RVec());
        for (int i = 0; i < m; ++i) {
            RVec ai(sf_.ncols, 0.0);
            for (const auto& [j, v] : sf_.rows[i]) ai[j] = v;
            zrows_[i] = detail::apply_w2(sf_, nt, ai);
        }
        RMat mmat(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = i; j < m; ++j) {
                double acc = 0.0;
                for (const auto& [col, v] : sf_.rows[i]) acc += v * zrows_[j][col];
                mmat(i, j) = acc;
                mmat(j, i) = acc;
            }
        // Clamped pivots instead of a global diagonal lift: near convergence
        // the Schur complement is numerically rank-deficient and any uniform
        // lift large enough to rescue the factorization would dominate its
        // small eigenvalues, defeating iterative refinement.
        return cholesky_clamped(mmat, schur_l_);
    }

    // Right-hand side of the scaled complementarity equation:
    //   lambda o (dxhat + dshat) = target*e - lambda o lambda - corrector
    // returned in svec layout. `ax`/`as` provide the affine direction for the
    // second-order corrector (nullptr for the predictor).
    RVec scaled_complementarity_target(const detail::NtScaling& nt, double target,
                                       const RVec* ax, const RVec* as) const {
        RVec bs(sf_.ncols, 0.0);
        for (int i = 0; i < sf_.nl; ++i) {
            double v = target - nt.lam[i] * nt.lam[i];
            if (ax) {
                const double dxh = (*ax)[i] / std::sqrt(nt.w2[i]);
                const double dsh = (*as)[i] * std::sqrt(nt.w2[i]);
                v -= dxh * dsh;
            }
            bs[i] = v;
        }
        int off = sf_.nl;
        for (size_t bidx = 0; bidx < sf_.sdims.size(); ++bidx) {
            const int d = sf_.sdims[bidx];
            RMat bm(d, d);
            for (int i = 0; i < d; ++i)
                bm(i, i) = target - nt.sig[bidx][i] * nt.sig[bidx][i];
            if (ax) {
                const RMat dxm = smat(d, ax->data() + off);
                const RMat dsm = smat(d, as->data() + off);
                // dxhat = G^{-1} dX G^{-T}, dshat = G' dS G.
                RMat dxh = nt.ginv[bidx] * dxm * nt.ginv[bidx].transposed();
                RMat dsh = nt.g[bidx].transposed() * dsm * nt.g[bidx];
                RMat prod = dxh * dsh + dsh * dxh;
                prod *= 0.5;
                bm -= prod;
            }
            bm.symmetrize();
            const RVec bv = svec(bm);
            std::copy(bv.begin(), bv.end(), bs.begin() + off);
            off += svec_len(d);
        }
        return bs;
    }

    // Solves the Newton system
    //   -A' dy + c dtau - ds            = -resid_frac * rx
    //    A dx - b dtau                  = -resid_frac * ry
    //    b' dy - c' dx - dkappa         = -resid_frac * rtau
    //    lambda o (dxhat + dshat)       = bs
    //    kappa dtau + tau dkappa        = bkappa
    // by elimination onto the Schur complement, with iterative refinement.
    detail::Direction solve_direction(const detail::NtScaling& nt, const RVec& rx,
                                      const RVec& ry, double rtau, const RVec& bs,
                                      double bkappa, double resid_frac) {
        RVec bx(sf_.ncols), by(sf_.rows.size());
        for (int j = 0; j < sf_.ncols; ++j) bx[j] = -resid_frac * rx[j];
        for (size_t i = 0; i < sf_.rows.size(); ++i) by[i] = -resid_frac * ry[i];
        const double btau = -resid_frac * rtau;

        detail::Direction dir = solve_core(nt, bx, by, btau, bs, bkappa);
        for (int pass = 0; pass < opt_.refinement_passes; ++pass) {
            // Residuals of the full Newton system; the dual and kappa
            // equations hold by construction, the rest carry the Schur-solve
            // and elimination error.
            RVec r1(sf_.ncols), r2(sf_.rows.size());
            for (int j = 0; j < sf_.ncols; ++j)
                r1[j] = bx[j] - (sf_.c[j] * dir.dtau - dir.ds[j]);
            for (size_t i = 0; i < sf_.rows.size(); ++i)
                for (const auto& [j, v] : sf_.rows[i]) r1[j] += v * dir.dy[i];
            for (size_t i = 0; i < sf_.rows.size(); ++i) {
                double adx = 0.0;
                for (const auto& [j, v] : sf_.rows[i]) adx += v * dir.dx[j];
                r2[i] = by[i] - (adx - sf_.b[i] * dir.dtau);
            }
            double r3 = btau - (dot(sf_.b, dir.dy) - dot(sf_.c, dir.dx) - dir.dkappa);
            const double rk = bkappa - (kappa_ * dir.dtau + tau_ * dir.dkappa);
            const RVec rs = complementarity_residual(nt, bs, dir);
            if (std::max({norm_inf(r1), norm_inf(r2), std::abs(r3), std::abs(rk),
                          norm_inf(rs)}) <
                1e-14 * (1.0 + norm_inf(bx) + norm_inf(by) + norm_inf(bs)))
                break;
            detail::Direction fix = solve_core(nt, r1, r2, r3, rs, rk);
            for (int j = 0; j < sf_.ncols; ++j) {
                dir.dx[j] += fix.dx[j];
                dir.ds[j] += fix.ds[j];
            }
            for (size_t i = 0; i < sf_.rows.size(); ++i) dir.dy[i] += fix.dy[i];
            dir.dtau += fix.dtau;
            dir.dkappa += fix.dkappa;
        }
        return dir;
    }

    // bs - lambda o (dxhat + dshat), in svec layout.
    RVec complementarity_residual(const detail::NtScaling& nt, const RVec& bs,
                                  const detail::Direction& dir) const {
        RVec rs(sf_.ncols);
        for (int i = 0; i < sf_.nl; ++i) {
            const double w = std::sqrt(nt.w2[i]);
            rs[i] = bs[i] - nt.lam[i] * (dir.dx[i] / w + w * dir.ds[i]);
        }
        int off = sf_.nl;
        for (size_t bidx = 0; bidx < sf_.sdims.size(); ++bidx) {
            const int d = sf_.sdims[bidx];
            const RMat dxm = smat(d, dir.dx.data() + off);
            const RMat dsm = smat(d, dir.ds.data() + off);
            RMat sum = nt.ginv[bidx] * dxm * nt.ginv[bidx].transposed() +
                       nt.g[bidx].transposed() * dsm * nt.g[bidx];
            sum.symmetrize();
            const RMat bm = smat(d, bs.data() + off);
            RMat r(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    r(i, j) = bm(i, j) -
                              0.5 * (nt.sig[bidx][i] + nt.sig[bidx][j]) * sum(i, j);
            const RVec rv = svec(r);
            std::copy(rv.begin(), rv.end(), rs.begin() + off);
            off += svec_len(d);
        }
        return rs;
    }

    detail::Direction solve_core(const detail::NtScaling& nt, const RVec& bx,
                                 const RVec& by, double btau, const RVec& bs,
                                 double bkappa) {
        const int m = static_cast<int>(sf_.rows.size());
        // d = lambda^{-1} o bs, expressed per cone; r1 = bx + W^{-1} d.
        RVec winvd(sf_.ncols, 0.0);
        for (int i = 0; i < sf_.nl; ++i)
            winvd[i] = bs[i] / nt.lam[i] / std::sqrt(nt.w2[i]);
        int off = sf_.nl;
        for (size_t bidx = 0; bidx < sf_.sdims.size(); ++bidx) {
            const int d = sf_.sdims[bidx];
            RMat bm = smat(d, bs.data() + off);
            RMat dm(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    dm(i, j) = 2.0 * bm(i, j) / (nt.sig[bidx][i] + nt.sig[bidx][j]);
            // W^{-1} d in matrix form: G^{-T} D G^{-1}.
            RMat wd = nt.ginv[bidx].transposed() * dm * nt.ginv[bidx];
            wd.symmetrize();
            const RVec wv = svec(wd);
            std::copy(wv.begin(), wv.end(), winvd.begin() + off);
            off += svec_len(d);
        }
        RVec r1(sf_.ncols);
        for (int j = 0; j < sf_.ncols; ++j) r1[j] = bx[j] + winvd[j];

        const RVec w2r1 = detail::apply_w2(sf_, nt, r1);
        const RVec w2c = detail::apply_w2(sf_, nt, sf_.c);

        RVec rhs1(m), rhs2(m);  // M u1 = by - A W^2 r1 ; M u2 = A W^2 c + b
        for (int i = 0; i < m; ++i) {
            double a_r1 = 0.0, a_c = 0.0;
            for (const auto& [j, v] : sf_.rows[i]) {
                a_r1 += v * w2r1[j];
                a_c += v * w2c[j];
            }
            rhs1[i] = by[i] - a_r1;
            rhs2[i] = a_c + sf_.b[i];
        }
        cholesky_solve(schur_l_, rhs1);
        cholesky_solve(schur_l_, rhs2);

        // dtau from the eliminated gap equation.
        double cw2c = dot(sf_.c, w2c), cw2r1 = dot(sf_.c, w2r1);
        RVec bma(m);  // b - A W^2 c
        for (int i = 0; i < m; ++i) {
            double a_c = 0.0;
            for (const auto& [j, v] : sf_.rows[i]) a_c += v * w2c[j];
            bma[i] = sf_.b[i] - a_c;
        }
        const double denom = dot(bma, rhs2) + cw2c + kappa_ / tau_;
        const double numer = btau + cw2r1 + bkappa / tau_ - dot(bma, rhs1);
        detail::Direction dir;
        dir.dtau = (std::abs(denom) > 1e-300) ? numer / denom : 0.0;

        dir.dy.resize(m);
        for (int i = 0; i < m; ++i) dir.dy[i] = rhs1[i] + rhs2[i] * dir.dtau;

        // dx = W^2 (r1 + A' dy - c dtau).
        RVec t(sf_.ncols);
        for (int j = 0; j < sf_.ncols; ++j) t[j] = r1[j] - sf_.c[j] * dir.dtau;
        for (int i = 0; i < m; ++i)
            for (const auto& [j, v] : sf_.rows[i]) t[j] += v * dir.dy[i];
        dir.dx = detail::apply_w2(sf_, nt, t);

        // ds from the dual equation rather than the complementarity one: the
        // latter multiplies dx error by W^{-2}, which blows up dual
        // feasibility once mu is small.
        dir.ds.resize(sf_.ncols);
        for (int j = 0; j < sf_.ncols; ++j)
            dir.ds[j] = sf_.c[j] * dir.dtau - bx[j];
        for (int i = 0; i < m; ++i)
            for (const auto& [j, v] : sf_.rows[i]) dir.ds[j] -= v * dir.dy[i];
        dir.dkappa = (bkappa - kappa_ * dir.dtau) / tau_;
        return dir;
    }

    double step_length(const detail::Direction& dir, double cap) const {
        double alpha = detail::max_cone_step(sf_, x_, dir.dx, cap);
        alpha = std::min(alpha, detail::max_cone_step(sf_, s_, dir.ds, cap));
        if (dir.dtau < 0.0) alpha = std::min(alpha, -tau_ / dir.dtau);
        if (dir.dkappa < 0.0) alpha = std::min(alpha, -kappa_ / dir.dkappa);
        return alpha;
    }

    double predicted_mu(const detail::Direction& dir, double alpha, double nu) const {
        double acc = 0.0;
        for (int j = 0; j < sf_.ncols; ++j)
            acc += (x_[j] + alpha * dir.dx[j]) * (s_[j] + alpha * dir.ds[j]);
        acc += (tau_ + alpha * dir.dtau) * (kappa_ + alpha * dir.dkappa);
        return acc / (nu + 1.0);
    }

    void take_step(const detail::Direction& dir, double alpha) {
        for (int j = 0; j < sf_.ncols; ++j) {
            x_[j] += alpha * dir.dx[j];
            s_[j] += alpha * dir.ds[j];
        }
        for (size_t i = 0; i < sf_.rows.size(); ++i) y_[i] += alpha * dir.dy[i];
        tau_ += alpha * dir.dtau;
        kappa_ += alpha * dir.dkappa;
    }

    StandardForm sf_;
    SolverOptions opt_;
    UnscaleInfo un_;
    RVec x_, y_, s_;
    double tau_ = 1.0, kappa_ = 1.0;
    RMat schur_l_;
    std::vector<RVec> zrows_;
};

// ---------------------------------------------------------------------------
// Problem builder.

struct VarRef {
    int first = -1;  // first logical scalar id
    int count = 0;
    bool valid() const { return first >= 0; }
};

// A linear expression over scalar variables and PSD entries; `psd` terms are
// in the symmetric sense (coef * X(i,j) with X(i,j) == X(j,i)).
struct LinExpr {
    struct PsdTerm {
        int block, i, j;
        double coef;
    };
    std::vector<std::pair<int, double>> scalars;  // logical id, coef
    std::vector<PsdTerm> psd;
    double constant = 0.0;

    LinExpr& add_scalar(int id, double c) {
        scalars.push_back({id, c});
        return *this;
    }
    LinExpr& add_psd(int block, int i, int j, double c) {
        psd.push_back({block, i, j, c});
        return *this;
    }
};

struct Solution {
    SolveStatus status = SolveStatus::numerical_trouble;
    double objective = 0.0;  // in the user's sense (max or min)
    int iterations = 0;
    KktResiduals kkt;
    double primal_res = 0.0, dual_res = 0.0, rel_gap = 0.0;

    bool usable(double res_tol = 1e-6) const {
        return status == SolveStatus::optimal ||
               (status != SolveStatus::primal_infeasible &&
                status != SolveStatus::dual_infeasible &&
                std::max({primal_res, dual_res, rel_gap}) <= res_tol);
    }

    double scalar(const VarRef& v, int k = 0) const {
        if (!v.valid() || k < 0 || k >= v.count) throw error("Solution: bad scalar ref");
        return scalar_values.at(v.first + k);
    }
    const RMat& psd(int block) const { return psd_values.at(block); }

    // Lagrange multiplier of a constraint row, normalized so that multipliers
    // of binding <= rows are nonnegative in both senses.  For a maximization
    // the strong-duality identity reads objective == sum_i row_dual(i) * rhs_i.
    double row_dual(int row) const {
        if (row < 0 || row >= static_cast<int>(row_duals.size()))
            throw error("Solution: bad row index");
        return row_duals[row];
    }

    std::vector<double> scalar_values;  // by logical id
    std::vector<RMat> psd_values;
    std::vector<double> row_duals;  // by row, empty when the solve produced no iterate
};

class ConicProblem {
public:
    VarRef add_nonneg(int count, const char* /*name*/ = nullptr) {
        if (count <= 0) throw error("add_nonneg: count must be positive");
        VarRef v{static_cast<int>(scalar_free_.size()), count};
        scalar_free_.insert(scalar_free_.end(), count, 0);
        return v;
    }

    VarRef add_free(int count, const char* /*name*/ = nullptr) {
        if (count <= 0) throw error("add_free: count must be positive");
        VarRef v{static_cast<int>(scalar_free_.size()), count};
        scalar_free_.insert(scalar_free_.end(), count, 1);
        return v;
    }

    int add_psd_block(int dim, const char* /*name*/ = nullptr) {
        if (dim <= 0) throw error("add_psd_block: dimension must be positive");
        psd_dims_.push_back(dim);
        return static_cast<int>(psd_dims_.size()) - 1;
    }

    int scalar_id(const VarRef& v, int k = 0) const {
        if (!v.valid() || k < 0 || k >= v.count) throw error("scalar_id: bad reference");
        return v.first + k;
    }

    int add_eq(double rhs) { return add_row(rhs, true); }
    int add_le(double rhs) { return add_row(rhs, false); }

    void add_coef(int row, const VarRef& v, int k, double c) {
        check_row(row);
        rows_[row].lin.push_back({scalar_id(v, k), require_finite(c)});
    }

    // Adds c * X(i,j) (symmetric sense) of PSD block `block` to the row.
    void add_psd_coef(int row, int block, int i, int j, double c) {
        check_row(row);
        check_psd(block, i, j);
        rows_[row].mat.push_back({block, i, j, require_finite(c)});
    }

    // Adds <m, X> for a symmetric coefficient matrix.
    void add_psd_matrix_coef(int row, int block, const RMat& m, double scale = 1.0) {
        check_row(row);
        if (block < 0 || block >= static_cast<int>(psd_dims_.size()) ||
            m.rows() != psd_dims_[block] || m.cols() != psd_dims_[block])
            throw error("add_psd_matrix_coef: bad block or shape");
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j <= i; ++j) {
                const double c = (i == j) ? m(i, i) : (m(i, j) + m(j, i));
                if (c != 0.0)
                    rows_[row].mat.push_back({block, i, j, require_finite(scale * c)});
            }
    }

    void add_expr(int row, const LinExpr& e, double scale = 1.0) {
        check_row(row);
        for (const auto& [id, c] : e.scalars) {
            if (id < 0 || id >= static_cast<int>(scalar_free_.size()))
                throw error("add_expr: bad scalar id");
            rows_[row].lin.push_back({id, require_finite(scale * c)});
        }
        for (const auto& t : e.psd) {
            check_psd(t.block, t.i, t.j);
            rows_[row].mat.push_back({t.block, t.i, t.j, require_finite(scale * t.coef)});
        }
        rows_[row].rhs -= scale * e.constant;
    }

    void set_maximize(bool maximize) { maximize_ = maximize; }
    void obj_coef(const VarRef& v, int k, double c) {
        objective_.lin.push_back({scalar_id(v, k), require_finite(c)});
    }
    void obj_psd_coef(int block, int i, int j, double c) {
        check_psd(block, i, j);
        objective_.mat.push_back({block, i, j, require_finite(c)});
    }
    void obj_psd_matrix(int block, const RMat& m, double scale = 1.0) {
        if (block < 0 || block >= static_cast<int>(psd_dims_.size()) ||
            m.rows() != psd_dims_[block])
            throw error("obj_psd_matrix: bad block or shape");
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j <= i; ++j) {
                const double c = (i == j) ? m(i, i) : (m(i, j) + m(j, i));
                if (c != 0.0) objective_.mat.push_back({block, i, j, require_finite(scale * c)});
            }
    }
    void obj_expr(const LinExpr& e, double scale = 1.0) {
        for (const auto& [id, c] : e.scalars) objective_.lin.push_back({id, scale * c});
        for (const auto& t : e.psd) {
            check_psd(t.block, t.i, t.j);
            objective_.mat.push_back({t.block, t.i, t.j, scale * t.coef});
        }
    }

    int num_rows() const { return static_cast<int>(rows_.size()); }

    // Compiles, equilibrates, solves and maps the result back to user space.
    Solution solve(const SolverOptions& opt = SolverOptions()) const {
        StandardForm sf = compile();
        if (opt.dump_standard_form) dump(sf, opt.dump_path);

        StandardForm scaled = sf;
        RVec dr, dc;
        double sb = 1.0, sc = 1.0;
        equilibrate(scaled, dr, dc, sb, sc);

        UnscaleInfo un;
        un.original = &sf;
        un.dr = dr;
        un.dc = dc;
        un.sb = sb;
        un.sc = sc;
        HsdSolver solver(scaled, opt, un);
        HsdResult hr = solver.solve();

        Solution sol;
        sol.status = hr.status;
        sol.iterations = hr.iterations;
        sol.primal_res = hr.primal_res;
        sol.dual_res = hr.dual_res;
        sol.rel_gap = hr.rel_gap;
        if (hr.x.empty()) return sol;

        // The solver already reports iterates in the original data space.
        const RVec& x = hr.x;
        sol.kkt = kkt_residuals(sf, x, hr.y, hr.s);
        const double pobj = dot(sf.c, x);
        sol.objective = maximize_ ? -pobj : pobj;

        if (hr.y.size() == rows_.size()) {
            sol.row_duals.resize(hr.y.size());
            for (size_t i = 0; i < hr.y.size(); ++i) sol.row_duals[i] = -hr.y[i];
        }

        // Map back to logical variables.
        sol.scalar_values.resize(scalar_free_.size());
        for (size_t id = 0; id < scalar_free_.size(); ++id) {
            const auto [pos, neg] = col_of_[id];
            sol.scalar_values[id] = x[pos] - (neg >= 0 ? x[neg] : 0.0);
        }
        sol.psd_values.resize(psd_dims_.size());
        for (size_t bidx = 0; bidx < psd_dims_.size(); ++bidx) {
            const int off = sf.block_offset(static_cast<int>(bidx));
            sol.psd_values[bidx] = smat(psd_dims_[bidx], x.data() + off);
        }
        return sol;
    }

    StandardForm compile() const {
        StandardForm sf;
        // Column layout: user scalars (free ones split into two nonnegs),
        // one slack per inequality row, then the PSD blocks.
        col_of_.assign(scalar_free_.size(), {-1, -1});
        int col = 0;
        for (size_t id = 0; id < scalar_free_.size(); ++id) {
            if (scalar_free_[id]) {
                col_of_[id] = {col, col + 1};
                col += 2;
            } else {
                col_of_[id] = {col, -1};
                col += 1;
            }
        }
        int n_slack = 0;
        for (const Row& r : rows_)
            if (!r.is_eq) ++n_slack;
        const int slack0 = col;
        sf.nl = col + n_slack;
        sf.sdims = psd_dims_;
        sf.ncols = sf.nl;
        for (int d : psd_dims_) sf.ncols += svec_len(d);

        const double inv_rt2 = 1.0 / std::sqrt(2.0);
        auto emit = [&](const Row& r, std::map<int, double>& acc) {
            for (const auto& [id, c] : r.lin) {
                const auto [pos, neg] = col_of_[id];
                acc[pos] += c;
                if (neg >= 0) acc[neg] -= c;
            }
            for (const auto& t : r.mat) {
                const int off = sf.block_offset(t.block);
                const int idx = off + svec_index(psd_dims_[t.block], t.i, t.j);
                acc[idx] += (t.i == t.j) ? t.coef : t.coef * inv_rt2;
            }
        };

        sf.rows.reserve(rows_.size());
        sf.b.reserve(rows_.size());
        int slack = slack0;
        for (const Row& r : rows_) {
            std::map<int, double> acc;
            emit(r, acc);
            if (!r.is_eq) acc[slack++] += 1.0;
            std::vector<std::pair<int, double>> srow(acc.begin(), acc.end());
            sf.rows.push_back(std::move(srow));
            sf.b.push_back(r.rhs);
        }

        sf.c.assign(sf.ncols, 0.0);
        std::map<int, double> oacc;
        emit(objective_, oacc);
        const double osign = maximize_ ? -1.0 : 1.0;
        for (const auto& [j, v] : oacc) sf.c[j] = osign * v;
        return sf;
    }

private:
    struct PsdTerm {
        int block, i, j;
        double coef;
    };
    struct Row {
        std::vector<std::pair<int, double>> lin;  // logical id, coef
        std::vector<PsdTerm> mat;
        double rhs = 0.0;
        bool is_eq = true;
    };

    int add_row(double rhs, bool eq) {
        rows_.push_back(Row{{}, {}, require_finite(rhs), eq});
        return static_cast<int>(rows_.size()) - 1;
    }
    void check_row(int row) const {
        if (row < 0 || row >= static_cast<int>(rows_.size()))
            throw error("ConicProblem: bad row index");
    }
    void check_psd(int block, int i, int j) const {
        if (block < 0 || block >= static_cast<int>(psd_dims_.size()) || i < 0 || j < 0 ||
            i >= psd_dims_[block] || j >= psd_dims_[block])
            throw error("ConicProblem: bad PSD entry reference");
    }
    static double require_finite(double v) {
        if (!std::isfinite(v)) throw error("ConicProblem: non-finite coefficient");
        return v;
    }

    // Ruiz-style max-norm equilibration; PSD blocks get one uniform column
    // scale so the cone structure survives, and b/c are normalized by
    // scalars absorbed into tau/kappa.
    static void equilibrate(StandardForm& sf, RVec& dr, RVec& dc, double& sb,
                            double& sc) {
        const int m = static_cast<int>(sf.rows.size());
        dr.assign(m, 1.0);
        dc.assign(sf.ncols, 1.0);
        std::vector<int> block_of(sf.ncols, -1);
        for (size_t bidx = 0; bidx < sf.sdims.size(); ++bidx) {
            const int off = sf.block_offset(static_cast<int>(bidx));
            for (int k = 0; k < svec_len(sf.sdims[bidx]); ++k)
                block_of[off + k] = static_cast<int>(bidx);
        }
        // Rows only, plus a single uniform scale per PSD block: scaling
        // individual solution columns would amplify the interior-point noise
        // of variables sitting at zero when the scaling is undone, so scalar
        // columns are left alone and block scales are clamped tightly.
        auto clamp_row = [](double v) { return std::min(1e8, std::max(1e-8, v)); };
        auto clamp_col = [](double v) { return std::min(1e2, std::max(1e-2, v)); };
        for (int pass = 0; pass < 4; ++pass) {
            for (int i = 0; i < m; ++i) {
                double mx = 0.0;
                for (const auto& [j, v] : sf.rows[i])
                    mx = std::max(mx, std::abs(v) * dr[i] * dc[j]);
                if (mx > 0.0) dr[i] = clamp_row(dr[i] / std::sqrt(mx));
            }
            if (sf.sdims.empty()) continue;
            RVec blockmax(sf.sdims.size(), 0.0);
            for (int i = 0; i < m; ++i)
                for (const auto& [j, v] : sf.rows[i])
                    if (block_of[j] >= 0)
                        blockmax[block_of[j]] = std::max(
                            blockmax[block_of[j]], std::abs(v) * dr[i] * dc[j]);
            for (int j = 0; j < sf.ncols; ++j)
                if (block_of[j] >= 0 && blockmax[block_of[j]] > 0.0)
                    dc[j] = clamp_col(dc[j] / std::sqrt(blockmax[block_of[j]]));
        }
        for (int i = 0; i < m; ++i) {
            for (auto& [j, v] : sf.rows[i]) v *= dr[i] * dc[j];
            sf.b[i] *= dr[i];
        }
        for (int j = 0; j < sf.ncols; ++j) sf.c[j] *= dc[j];
        sb = 1.0 / std::max(1.0, norm_inf(sf.b));
        sc = 1.0 / std::max(1.0, norm_inf(sf.c));
        for (auto& v : sf.b) v *= sb;
        for (auto& v : sf.c) v *= sc;
    }

    static void dump(const StandardForm& sf, const std::string& path) {
        std::FILE* f = std::fopen(path.c_str(), "w");
        if (!f) throw error("cannot open dump path: " + path);
        std::fprintf(f, "nonneg %d\npsd", sf.nl);
        for (int d : sf.sdims) std::fprintf(f, " %d", d);
        std::fprintf(f, "\nrows %zu cols %d\n", sf.rows.size(), sf.ncols);
        for (size_t i = 0; i < sf.rows.size(); ++i)
            for (const auto& [j, v] : sf.rows[i])
                std::fprintf(f, "A %zu %d %.17g\n", i, j, v);
        for (size_t i = 0; i < sf.b.size(); ++i)
            std::fprintf(f, "b %zu %.17g\n", i, sf.b[i]);
        for (int j = 0; j < sf.ncols; ++j)
            if (sf.c[j] != 0.0) std::fprintf(f, "c %d %.17g\n", j, sf.c[j]);
        std::fclose(f);
    }

    std::vector<char> scalar_free_;  // 1 = free (split), 0 = nonnegative
    std::vector<int> psd_dims_;
    std::vector<Row> rows_;
    Row objective_;
    bool maximize_ = false;
    mutable std::vector<std::pair<int, int>> col_of_;  // logical -> (pos, neg) cols
};

}  // namespace wpmr
