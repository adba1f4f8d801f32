#pragma once

// Power-splitting scheme.  A block of unit length splits into two equal
// transmission hops: the source sends an information beam W_p (trace <= 1,
// scaled by p_o), relay n splits its received signal power, diverting a
// fraction rho_n to its harvester and keeping 1 - rho_n for information, then
// amplifies and forwards with power p_n.  Writing the harvested split through
// a second matrix Wbar with f_n^H Wbar f_n = rho_n f_n^H W f_n,
//
//     y_n^2 = (1 - rho_n) p_o f_n^H W f_n      (received information power)
//     x_n   = sqrt(p_n / (y_n^2 + 1))          (amplification coefficient)
//     gamma = (sum_n x_n y_n |g_n|)^2 / (1 + sum_n x_n^2 |g_n|^2),
//
// so with X = sum_n x_n^2 |g_n|^2 and Y = sum_n y_n^2 the Cauchy-Schwarz
// bound gamma <= X Y / (1 + X) holds with equality exactly when y_n = theta
// x_n |g_n| for a common ratio theta.  The search therefore runs over the
// normal set of achievable (X, Y) pairs with objective X Y / (1 + X); for a
// ray through (X_k, Y_k) the best ratio is theta = sqrt(Y_k / X_k), which
// collapses the two scaled coordinates into one convex program over
// kappa_n = y_n^2:
//
//     max  sum_n kappa_n
//     s.t. [[p_n theta^2 |g_n|^2 - kappa_n, kappa_n], [kappa_n, 1]] >= 0
//          kappa_n <= p_o f_n^H (W - Wbar) f_n
//          p_n     <= eta p_o f_n^H Wbar f_n
//          chance blocks on D(p),  Tr(W) <= 1,  Tr(Wbar) <= 1,
//          W >= 0, Wbar >= 0, kappa >= 0, p >= 0,
//
// whose optimum q gives the exact ray scaling lambda = q / Y_k: the 2x2 block
// is the Schur-complement form of p_n theta^2 |g_n|^2 >= (kappa_n + 1)
// kappa_n, the amplification a relay needs to hold the ratio theta at signal
// level kappa_n, and any solution of the program converts into a design on
// the equality manifold with the same kappa by raising rho_n until the
// received power meets kappa_n and trimming p_n to the ratio-matched power.

#include <algorithm>
#include <cmath>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "wpmr/chance.hpp"
#include "wpmr/common.hpp"
#include "wpmr/conic.hpp"
#include "wpmr/linalg.hpp"
#include "wpmr/polyblock.hpp"
#include "wpmr/scenario.hpp"

namespace wpmr {

struct PsProblemData {
    int n = 0;                  // relays
    int k = 0;                  // source antennas
    double p_o = 0.0;
    std::vector<RMat> f_outer;  // embed(f_n f_n^H)/2: <., W_emb> = f_n^H W f_n
    RVec g2;                    // |g_n|^2
    RVec f2;                    // ||f_n||^2
};

inline PsProblemData build_ps_matrices(const ChannelRealization& re, double p_o) {
    const int n = static_cast<int>(re.g.size());
    if (n == 0 || static_cast<int>(re.f.size()) != n)
        throw error("build_ps_matrices: inconsistent realization");
    if (!(p_o > 0.0)) throw error("build_ps_matrices: p_o must be > 0");
    PsProblemData d;
    d.n = n;
    d.k = static_cast<int>(re.f[0].size());
    d.p_o = p_o;
    d.f_outer.reserve(n);
    d.g2.resize(n);
    d.f2.resize(n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(re.f[i].size()) != d.k)
            throw error("build_ps_matrices: ragged channel matrix");
        d.f_outer.push_back(real_embed(CMat::outer(re.f[i])) * 0.5);
        d.g2[i] = std::norm(re.g[i]);
        double f2 = 0.0;
        for (const cxd& v : re.f[i]) f2 += std::norm(v);
        d.f2[i] = f2;
    }
    return d;
}

// Best common ratio theta for testing points on the ray through (X_k, Y_k):
// a larger theta scales y down onto the manifold, a smaller one scales x, so
// sqrt(Y_k / X_k) dominates every other choice.
inline double theta_star(double x_k, double y_k) {
    if (!(x_k > 0.0)) throw error("theta_star: X must be > 0");
    if (!(y_k >= 0.0)) throw error("theta_star: Y must be >= 0");
    return std::sqrt(y_k / x_k);
}

struct PsFeasibility {
    bool feasible = false;
    double q = 0.0;   // optimal sum of kappa; 0 when the solver failed
    RVec kappa;
    RVec p;
    CMat w;           // information beamformer W
    CMat wbar;        // harvested-split matrix Wbar
    double theta = 0.0;
    bool solved = false;          // the conic solve finished usable
    double solve_residual = 0.0;  // its worst KKT residual, for certificate padding
    double env_slope = -1.0;      // d(optimum)/d(theta^2) dual bound; < 0 if unavailable
    double env_dsum = -1.0;       // unit-tie dual mass, prices shrinking theta^2
};

struct PsOracleOptions {
    SolverOptions solver;
    int sca_rounds = 2;   // successive approximations for the nonlinear harvester
    double margin = 1e-8; // feasibility margin on q >= lambda Y_k

    // Deliberate model corruptions for the validation suite's mutation
    // checks; must stay off in any real run.
    double theta_override = 0.0;     // > 0 pins the manifold ratio
    bool break_lmi_coupling = false; // flips the kappa sign in the 2x2 block corner
};

// Feasibility of the scaled target (X, Y) = lam * z: solves the convex
// program above at theta = theta_star(z) and reports q = max sum kappa, so
// lam * z is achievable iff q >= lam * Y.  With the nonlinear harvester the
// budget slope is refined by successive approximation and the returned
// (kappa, p) are shrunk until the true logistic budget holds, keeping the
// verdict conservative.
inline PsFeasibility ps_feasibility_sdp(const PsProblemData& d, const NetworkScenario& sc,
                                        const ChannelRealization& re,
                                        const std::vector<MomentAmbiguitySet>& ambs,
                                        const Vertex& z, double lam,
                                        const PsOracleOptions& opt = {}) {
    if (z.size() != 2) throw error("ps_feasibility_sdp: vertex must be (X, Y)");
    if (!(lam > 0.0 && lam <= 1.0)) throw error("ps_feasibility_sdp: lambda in (0, 1]");
    const int n = d.n;
    const int k = d.k;

    PsFeasibility out;
    out.kappa.assign(n, 0.0);
    out.p.assign(n, 0.0);
    out.w = CMat(k);
    out.wbar = CMat(k);
    const double target = lam * z[1];
    if (target <= 1e-15) {
        // a zero information target needs no received signal at all
        for (int i = 0; i < k; ++i) out.w(i, i) = 1.0 / k;
        out.feasible = true;
        return out;
    }
    const double theta =
        opt.theta_override > 0.0 ? opt.theta_override : theta_star(z[0], z[1]);
    out.theta = theta;
    const double th2 = theta * theta;

    const bool nonlinear = sc.eh_model == EhModel::nonlinear;
    const NonlinearEhModel eh = nonlinear ? nonlinear_model(sc) : NonlinearEhModel{};
    RVec slope(n, sc.eta);  // budget slope on the harvested receive power

    const int rounds = nonlinear ? std::max(1, opt.sca_rounds) : 1;
    for (int round = 0; round < rounds; ++round) {
        ConicProblem cp;
        const int wb = cp.add_psd_block(2 * k);
        const int wbarb = cp.add_psd_block(2 * k);
        const VarRef kap = cp.add_nonneg(n);
        const VarRef pv = cp.add_nonneg(n);
        std::vector<int> corner_rows(n), unit_rows(n);
        for (int i = 0; i < n; ++i) {
            const int lb = cp.add_psd_block(2);
            // ties pinning the 2x2 block to its affine entries
            const int corner = cp.add_eq(0.0);
            corner_rows[i] = corner;
            cp.add_psd_coef(corner, lb, 0, 0, 1.0);
            cp.add_coef(corner, pv, i, -th2 * d.g2[i]);
            cp.add_coef(corner, kap, i, opt.break_lmi_coupling ? -1.0 : 1.0);
            const int cross = cp.add_eq(0.0);
            cp.add_psd_coef(cross, lb, 1, 0, 1.0);
            cp.add_coef(cross, kap, i, -1.0);
            const int unit = cp.add_eq(1.0);
            unit_rows[i] = unit;
            cp.add_psd_coef(unit, lb, 1, 1, 1.0);
            // split: kappa_n <= p_o f_n^H (W - Wbar) f_n
            const int split = cp.add_le(0.0);
            cp.add_coef(split, kap, i, 1.0);
            cp.add_psd_matrix_coef(split, wb, d.f_outer[i], -d.p_o);
            cp.add_psd_matrix_coef(split, wbarb, d.f_outer[i], d.p_o);
            // budget: p_n <= slope_n p_o f_n^H Wbar f_n
            const int budget = cp.add_le(0.0);
            cp.add_coef(budget, pv, i, 1.0);
            cp.add_psd_matrix_coef(budget, wbarb, d.f_outer[i], -slope[i] * d.p_o);
        }
        for (int blk : {wb, wbarb}) {
            const int tr = cp.add_le(2.0);  // Tr <= 1 doubled by the embedding
            for (int i = 0; i < 2 * k; ++i) cp.add_psd_coef(tr, blk, i, i, 1.0);
        }
        for (const MomentAmbiguitySet& amb : ambs) {
            std::vector<LinExpr> powers(n);
            for (int i = 0; i < n; ++i) powers[i].add_scalar(cp.scalar_id(pv, i), 1.0);
            add_chance_blocks(cp, powers, amb);
        }
        cp.set_maximize(true);
        for (int i = 0; i < n; ++i) cp.obj_coef(kap, i, 1.0);

        const Solution s = cp.solve(opt.solver);
        if (!s.usable()) {
            logf(LogLevel::debug, "ps oracle: solver %s at X=%g Y=%g lam=%g",
                 to_string(s.status), z[0], z[1], lam);
            out.q = 0.0;
            return out;
        }
        double qsum = 0.0;
        for (int i = 0; i < n; ++i) {
            out.kappa[i] = std::max(0.0, s.scalar(kap, i));
            out.p[i] = std::max(0.0, s.scalar(pv, i));
            qsum += out.kappa[i];
        }
        out.w = unembed_hermitian(s.psd(wb), k);
        out.wbar = unembed_hermitian(s.psd(wbarb), k);
        // report the witness sum, and absorb any disagreement with the solver's
        // objective into the residual so certificate padding stays honest
        out.q = qsum;
        out.solved = true;
        out.solve_residual = s.kkt.max_residual() + std::abs(s.objective - qsum);

        // Dual sensitivity bound on the optimum as c = theta^2 grows.  Each
        // corner tie's multiplier a_i prices the coupling between the 2x2
        // block and c g_i^2 p_i, and two explicit dual-point extensions stay
        // feasible at every c' = c (1 + u), u >= 0:
        //   * budget route: add a_i g_i^2 (c' - c) to the power-budget
        //     multiplier and grow the Wbar trace multiplier by the top
        //     eigenvalue of the priced channel mix, paying
        //     2 p_o eta lammax(sum a_i g_i^2 F_i) per unit c.
        //   * rescale route: shrink a_i to a_i / (1 + u) (keeping a_i c and
        //     the block product a_i d_i invariant, so the power column and
        //     the 2x2 dual block need no repair), restore the kappa column
        //     with the split multipliers, and pay for those through the W
        //     trace: dsum + 2 p_o lammax(sum a_i F_i) per unit c, with
        //     dsum = sum d_i the unit ties' mass.
        // By weak duality either route caps q(c') for all c' >= c; keep the
        // smaller slope.  Only meaningful with the plain coupling and a
        // fixed budget slope.
        if (!nonlinear && !opt.break_lmi_coupling && !s.row_duals.empty()) {
            RMat priced(2 * k, 2 * k);
            RMat bare(2 * k, 2 * k);
            for (int i = 0; i < n; ++i) {
                const double a = std::max(0.0, s.row_dual(corner_rows[i]));
                if (a <= 0.0) continue;
                priced += d.f_outer[i] * (a * slope[i] * d.g2[i]);
                bare += d.f_outer[i] * a;
            }
            auto lam_cert = [](const RMat& m) {
                const double top = eig_symmetric(m).values.back();
                return std::max(0.0, top) * (1.0 + 1e-9) + 1e-12 * (1.0 + m.frobenius());
            };
            double dsum = 0.0;
            for (int i = 0; i < n; ++i) dsum += s.row_dual(unit_rows[i]);
            out.env_dsum = std::max(0.0, dsum);
            const double budget_route = 2.0 * d.p_o * lam_cert(priced);
            const double rescale_route =
                (out.env_dsum * (1.0 + 1e-9) + 2.0 * d.p_o * lam_cert(bare)) / th2;
            out.env_slope = std::min(budget_route, rescale_route);
        }

        if (!nonlinear) break;
        // refine the budget slope around the harvested power this design implies
        bool moved = false;
        for (int i = 0; i < n; ++i) {
            const double rx = d.p_o * std::max(0.0, quad_form(out.wbar, re.f[i]));
            if (rx > 1e-12) {
                const double next = nonlinear_eh(rx, eh, i) / rx;
                if (std::abs(next - slope[i]) > 1e-6 * std::max(slope[i], next)) moved = true;
                slope[i] = std::max(next, 1e-12);
            }
        }
        if (!moved) break;
    }

    if (nonlinear) {
        // enforce the true logistic budget, then re-cap each kappa to what the
        // 2x2 block allows at the shrunk power
        double q = 0.0;
        for (int i = 0; i < n; ++i) {
            const double rx = d.p_o * std::max(0.0, quad_form(out.wbar, re.f[i]));
            out.p[i] = std::min(out.p[i], nonlinear_eh(rx, eh, i));
            const double amp = out.p[i] * th2 * d.g2[i];
            out.kappa[i] =
                std::min(out.kappa[i], 0.5 * (std::sqrt(1.0 + 4.0 * amp) - 1.0));
            q += out.kappa[i];
        }
        out.q = q;
    }

    out.feasible = out.q >= target - opt.margin * std::max(1.0, target);
    return out;
}

struct PsWitness {
    RVec kappa;
    RVec p;
    CMat w;
    CMat wbar;
    double theta = 0.0;
    double q = 0.0;
};

// Direct boundary projection: one convex solve per vertex gives the exact
// ray scaling lambda = q / Y_k, so no bisection is needed.
//
// Certified bound.  Write qhat(theta) for the optimum of the convex program
// at manifold ratio theta; the boundary point on that ray is
// (qhat / theta^2, qhat) with SNR qhat^2 / (theta^2 + qhat), and the global
// optimum is the supremum of that value over rays.  Reusing a design across
// ratios gives two rigorous envelopes on qhat, so the solves the projection
// already performs double as a global certificate:
//   * step: qhat is nondecreasing in theta.  The amplification constraint
//     kappa (kappa + 1) <= theta^2 |g_n|^2 p_n only loosens as theta grows
//     and nothing else depends on theta, so a solve at theta caps qhat on
//     every smaller ratio.
//   * growth: qhat(theta) / theta^2 is nonincreasing.  Scaling kappa by
//     c = (theta' / theta)^2 <= 1 keeps kappa' (kappa' + 1) <= c kappa
//     (kappa + 1), so a design at theta shrinks onto any smaller ratio with
//     at worst proportional loss, i.e. qhat(theta') <= (theta'/theta)^2
//     qhat(theta) for theta' >= theta.
//   * dual envelope: each solve's dual point extends to every larger theta^2
//     (see ps_feasibility_sdp), giving the affine cap qhat(t) <= qhat_j +
//     slope_j (t^2 - theta_j^2).  qhat(theta^2) is not concave, so tangent
//     lines alone would be unsound; the extension argument is what makes the
//     cap global.  Near the best ray the cap is nearly tight, which is what
//     turns the certificate's gap decay from linear to quadratic in the
//     anchor spacing.
// Analytic caps close the unexplored tails: the trace rows give
// qhat <= p_o sum ||f_n||^2, and the per-relay budget gives kappa_n <=
// psi(theta^2 |g_n|^2 eta p_o ||f_n||^2) with psi(a) = (sqrt(1 + 4a) - 1)/2
// (psi is concave with psi(0) = 0, so psi(s a) <= s psi(a) for s >= 1 and
// the analytic cap obeys the same growth rule).  A branch-and-bound over
// theta then bounds the SNR on every ray.  The nonlinear harvester's solves
// are conservative approximations rather than ray optima, so no certificate
// is claimed for it and the engine falls back to plain vertex bounds.
struct PsOracle {
    using Witness = PsWitness;
    const PsProblemData* data = nullptr;
    const NetworkScenario* sc = nullptr;
    const ChannelRealization* re = nullptr;
    const std::vector<MomentAmbiguitySet>* ambs = nullptr;
    PsOracleOptions opt;
    long long queries = 0;

    // certificate state: per-ray optima with solver padding, their dual
    // envelope slopes, running step/growth minima, the analytic caps, and a
    // polish budget
    std::vector<double> anchor_theta;  // sorted ascending
    std::vector<double> anchor_q;      // padded per-ray optimum, same order
    std::vector<double> anchor_slope_; // dual slope in theta^2; +inf if none
    int refine_solves_left = 800;

    Projection<PsWitness> project(const Vertex& z, double eps) {
        ++queries;
        if (z.size() != 2) throw error("PsOracle: vertex must be (X, Y)");
        if (!(z[0] > 0.0 && z[1] > 0.0))
            throw error("PsOracle: vertex coordinates must be positive");
        if (!(eps > 0.0) || eps >= 1.0) throw error("PsOracle: eps must be in (0, 1)");
        PsFeasibility f = ps_feasibility_sdp(*data, *sc, *re, *ambs, z, 1.0, opt);
        note_anchor(f);
        Projection<PsWitness> out;
        const double lam = f.q / z[1];
        if (!(lam > eps)) return out;  // ray not worth keeping (or solver failure)
        out.lambda = lam;
        out.has_witness = true;
        out.witness = PsWitness{std::move(f.kappa), std::move(f.p), std::move(f.w),
                                std::move(f.wbar), f.theta, f.q};
        return out;
    }

    bool certificate_on() const {
        return sc != nullptr && data != nullptr && sc->eh_model == EhModel::linear &&
               !opt.break_lmi_coupling;
    }

    void note_anchor(const PsFeasibility& f) {
        if (!certificate_on() || !f.solved || !(f.theta > 0.0) || !std::isfinite(f.theta))
            return;
        const double pad = 10.0 * f.solve_residual * (1.0 + std::abs(f.q)) + 1e-12;
        const double q = std::max(f.q, 0.0) + pad;
        const double slope = f.env_slope >= 0.0 ? f.env_slope
                                                : std::numeric_limits<double>::infinity();
        const auto it = std::lower_bound(anchor_theta.begin(), anchor_theta.end(), f.theta);
        const std::size_t idx = static_cast<std::size_t>(it - anchor_theta.begin());
        if (it != anchor_theta.end() && *it == f.theta) {
            // keep the sharper solve; value and slope must stay paired because
            // the envelope extends that solve's own dual point
            if (q < anchor_q[idx]) {
                anchor_q[idx] = q;
                anchor_slope_[idx] = slope;
            }
        } else {
            anchor_theta.insert(it, f.theta);
            anchor_q.insert(anchor_q.begin() + idx, q);
            anchor_slope_.insert(anchor_slope_.begin() + idx, slope);
        }
        // running minima looking right (step) and left (growth)
        const std::size_t m = anchor_theta.size();
        step_min_.assign(m, 0.0);
        growth_min_.assign(m, 0.0);
        double s = std::numeric_limits<double>::infinity();
        for (std::size_t i = m; i-- > 0;) step_min_[i] = s = std::min(s, anchor_q[i]);
        double g = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i)
            growth_min_[i] = g = std::min(g, anchor_q[i] / (anchor_theta[i] * anchor_theta[i]));
    }

    static double psi(double a) {
        return a > 0.0 ? 0.5 * (std::sqrt(1.0 + 4.0 * a) - 1.0) : 0.0;
    }

    // analytic cap: kappa_n never exceeds its split cap nor what full budget
    // power amplifies to, and each term obeys the growth rule
    double analytic_cap(double th) const {
        double a = 0.0;
        for (std::size_t i = 0; i < amp_cap_.size(); ++i)
            a += std::min(split_cap_[i], psi(th * th * amp_cap_[i]));
        return a;
    }

    // upper bound on qhat at every ratio <= th
    double q_step_cap(double th) const {
        double q = std::isfinite(th) ? analytic_cap(th) : q_trace_cap_;
        const auto it = std::lower_bound(anchor_theta.begin(), anchor_theta.end(), th);
        if (it != anchor_theta.end())
            q = std::min(q, step_min_[static_cast<std::size_t>(it - anchor_theta.begin())]);
        return q;
    }

    // growth coefficient valid on every ratio >= th: qhat(t) <= G t^2
    double growth_cap(double th) const {
        if (!(th > 0.0)) return std::numeric_limits<double>::infinity();
        double g = analytic_cap(th) / (th * th);
        const auto it = std::upper_bound(anchor_theta.begin(), anchor_theta.end(), th);
        if (it != anchor_theta.begin())
            g = std::min(g, growth_min_[static_cast<std::size_t>(it - anchor_theta.begin()) - 1]);
        return g;
    }

    static double snr_at(double q, double th) {
        return q > 0.0 ? q * q / (th * th + q) : 0.0;
    }

    // largest boundary SNR any ray with slope in [a, b] can reach under the
    // caps: constant q_step_cap(b) from above, growth_cap(a) t^2 from the
    // left, best case at their crossing; then intersected with the dual
    // envelope of the nearest anchor at or left of a, an affine cap
    // q <= qhat_j + slope_j (theta^2 - theta_j^2) valid across the cell.  The
    // SNR along any affine cap with nonnegative slope is unimodal with an
    // interior minimum, so its maximum over the cell sits at an endpoint.
    double cell_bound(double a, double b) const {
        const double qb = q_step_cap(b);
        if (!(qb > 0.0)) return 0.0;
        const double ga = growth_cap(a);
        double bound;
        if (!std::isfinite(ga)) {
            bound = qb;  // a == 0: gamma <= q always
        } else {
            const double cross2 = qb / ga;
            if (cross2 <= a * a) bound = qb * qb / (a * a + qb);
            else if (std::isfinite(b) && cross2 >= b * b)
                bound = b * b * ga * ga / (1.0 + ga);
            else bound = qb * ga / (1.0 + ga);
        }
        if (a > 0.0 && !anchor_theta.empty()) {
            auto it = std::upper_bound(anchor_theta.begin(), anchor_theta.end(), a);
            for (int back = 0; back < 4 && it != anchor_theta.begin(); ++back) {
                --it;
                const std::size_t j = static_cast<std::size_t>(it - anchor_theta.begin());
                const double slope = anchor_slope_[j];
                if (!std::isfinite(slope)) continue;   // solve carried no duals
                const double cj = anchor_theta[j] * anchor_theta[j];
                double env = snr_at(anchor_q[j] + slope * (a * a - cj), a);
                if (std::isfinite(b))
                    env = std::max(env, snr_at(anchor_q[j] + slope * (b * b - cj), b));
                else if (slope > 0.0)
                    continue;  // cap unbounded over an unbounded cell
                bound = std::min(bound, env);
                break;
            }
        }
        return bound;
    }

    // Global certified SNR bound: branch-and-bound over the ray slope.  The
    // heap maximum is always a valid global bound; splitting the top cell
    // until it is narrow makes it tight near the best ray.
    double certified_upper() {
        if (!certificate_on()) return std::numeric_limits<double>::infinity();
        ensure_caps();
        if (!(q_trace_cap_ > 0.0) || !(amp_sum_ > 0.0)) return 0.0;
        struct Cell {
            double bound, a, b;
            bool operator<(const Cell& o) const { return bound < o.bound; }
        };
        auto cell_of = [&](double a, double b) { return Cell{cell_bound(a, b), a, b}; };
        std::priority_queue<Cell> heap;
        const double mid = std::sqrt(q_trace_cap_ / amp_sum_);
        const int seed_cells = 64;
        double lo = mid * 1e-5;
        const double ratio = std::pow(1e10, 1.0 / seed_cells);
        heap.push(cell_of(0.0, lo));
        for (int i = 0; i < seed_cells; ++i) {
            const double hi = i + 1 == seed_cells ? mid * 1e5 : lo * ratio;
            heap.push(cell_of(lo, hi));
            lo = hi;
        }
        heap.push(cell_of(lo, std::numeric_limits<double>::infinity()));
        const int splits =
            std::min<int>(2500, 60 + 8 * static_cast<int>(anchor_theta.size()));
        for (int i = 0; i < splits; ++i) {
            const Cell top = heap.top();
            if (std::isfinite(top.b) && top.b - top.a <= 1e-6 * top.a) break;
            heap.pop();
            double m = top.a <= 0.0            ? top.b / 8.0
                       : !std::isfinite(top.b) ? top.a * 8.0
                                               : std::sqrt(top.a * top.b);
            // an anchor strictly inside a cell caps neither side until it
            // becomes an endpoint, so prefer splitting at the interior anchor
            // nearest the geometric split point
            const auto lo_it = std::upper_bound(anchor_theta.begin(), anchor_theta.end(),
                                                top.a * (1.0 + 1e-12));
            const auto hi_it = std::lower_bound(anchor_theta.begin(), anchor_theta.end(),
                                                std::isfinite(top.b)
                                                    ? top.b * (1.0 - 1e-12)
                                                    : std::numeric_limits<double>::max());
            if (lo_it != hi_it) {
                auto pick = std::lower_bound(lo_it, hi_it, m);
                if (pick == hi_it) --pick;
                else if (pick != lo_it && m - *(pick - 1) < *pick - m) --pick;
                m = *pick;
            }
            heap.push(cell_of(top.a, m));
            heap.push(cell_of(m, top.b));
        }
        const Cell top = heap.top();
        last_argmax_theta_ = top.a <= 0.0          ? top.b / 2.0
                             : !std::isfinite(top.b) ? top.a * 2.0
                                                     : std::sqrt(top.a * top.b);
        return std::max(top.bound, 0.0);
    }

    // Polishes the incumbent by solving directly on the most promising rays:
    // the boundary point there is exact, so each solve either lifts the
    // incumbent or sharpens the certificate (often both).
    std::optional<std::pair<Vertex, PsWitness>> refine_incumbent(const Vertex& z,
                                                                 double r_best) {
        if (refine_solves_left <= 0 || data == nullptr) return std::nullopt;
        double best_r = r_best;
        std::optional<std::pair<Vertex, PsWitness>> out;
        for (int attempt = 0; attempt < 6 && refine_solves_left > 0; ++attempt) {
            double th = last_argmax_theta_;
            if (!(th > 0.0) && z.size() == 2 && z[0] > 0.0 && z[1] > 0.0)
                th = theta_star(z[0], z[1]);  // no certificate: polish the stalled ray
            if (!(th > 0.0) || !std::isfinite(th)) break;
            // a ray this close to an existing anchor has nothing left to teach
            const auto near = std::lower_bound(anchor_theta.begin(), anchor_theta.end(),
                                               th * (1.0 - 1e-12));
            if (near != anchor_theta.end() && *near <= th * (1.0 + 1e-12)) break;
            ++queries;
            --refine_solves_left;
            PsFeasibility f = ps_feasibility_sdp(*data, *sc, *re, *ambs,
                                                 Vertex{1.0 / (th * th), 1.0}, 1.0, opt);
            note_anchor(f);
            if (f.solved && f.q > 0.0) {
                const double ray_r = f.q * f.q / (th * th + f.q);
                if (ray_r > best_r) {
                    best_r = ray_r;
                    out = std::make_pair(
                        Vertex{f.q / (th * th), f.q},
                        PsWitness{std::move(f.kappa), std::move(f.p), std::move(f.w),
                                  std::move(f.wbar), f.theta, f.q});
                }
            }
            if (!certificate_on()) break;  // nothing to re-target without the bound
            certified_upper();  // the fresh anchor moves the argmax
        }
        return out;
    }

    // ray slope the certificate currently considers most promising
    double last_argmax() const { return last_argmax_theta_; }

  private:
    void ensure_caps() {
        if (q_trace_cap_ >= 0.0 || data == nullptr) return;
        q_trace_cap_ = 0.0;
        amp_sum_ = 0.0;
        amp_cap_.assign(data->n, 0.0);
        split_cap_.assign(data->n, 0.0);
        for (int i = 0; i < data->n; ++i) {
            split_cap_[i] = data->p_o * data->f2[i];
            q_trace_cap_ += split_cap_[i];
            amp_cap_[i] = data->g2[i] * sc->eta * data->p_o * data->f2[i];
            amp_sum_ += amp_cap_[i];
        }
    }

    std::vector<double> step_min_;    // suffix minima of anchor_q
    std::vector<double> growth_min_;  // prefix minima of anchor_q / theta^2
    RVec amp_cap_;                    // per-relay theta^2 coefficient cap
    RVec split_cap_;                  // per-relay cap on kappa from the trace row
    double amp_sum_ = 0.0;
    double q_trace_cap_ = -1.0;  // < 0 until prepared
    double last_argmax_theta_ = -1.0;
};

// Splitting ratios carried by the pair (W, Wbar): the ratio of the two
// quadratic forms per relay, clamped to [0, 1].  A relay receiving nothing
// gets rho = 0 with a warning.
inline RVec recover_ps_ratios(const CMat& w, const CMat& wbar, const std::vector<CVec>& f) {
    const int n = static_cast<int>(f.size());
    if (w.dim() != wbar.dim()) throw error("recover_ps_ratios: dimension mismatch");
    RVec rho(n, 0.0);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(f[i].size()) != w.dim())
            throw error("recover_ps_ratios: channel dimension mismatch");
        const double den = quad_form(w, f[i]);
        if (!(den > 0.0)) {
            logf(LogLevel::warn, "recover_ps_ratios: relay %d receives nothing, rho = 0", i);
            continue;
        }
        const double raw = quad_form(wbar, f[i]) / den;
        const double clamped = std::clamp(raw, 0.0, 1.0);
        if (std::abs(raw - clamped) > 1e-8)
            logf(LogLevel::warn, "recover_ps_ratios: relay %d ratio %.12g clamped to %g", i,
                 raw, clamped);
        rho[i] = clamped;
    }
    return rho;
}

// --- driver ------------------------------------------------------------------

struct PsOptions {
    double eps = 0.0;  // 0 -> scenario epsilon
    int max_iterations = 500;
    PsOracleOptions oracle;
    // The two hops take half the block each, so rate (1/2) log2(1 + gamma);
    // the toggle reports log2(1 + gamma) instead for whole-block accounting.
    bool halve_throughput = true;
};

struct PsSolution {
    double X = 0.0;           // relaxation coordinates of the incumbent
    double Y = 0.0;
    double gamma = 0.0;       // achieved SNR of the recovered design
    double throughput = 0.0;
    RVec rho;                 // splitting ratios
    RVec p;                   // relay transmit powers
    RVec kappa;
    CMat w;                   // information beamformer
    CMat wbar;                // harvested-split matrix
    double theta = 0.0;
    bool converged = false;
    int iterations = 0;
    long long oracle_queries = 0;
    MonotonicTrace<PsWitness> trace;
};

inline double ps_relaxed_snr(const Vertex& z) { return z[0] * z[1] / (1.0 + z[0]); }

inline double ps_throughput_of(double gamma, bool halve) {
    return (halve ? 0.5 : 1.0) * std::log2(1.0 + gamma);
}

// Evaluates the end-to-end SNR of the design carried by a witness: splitting
// ratios from the (W, Wbar) pair, received powers from those ratios, and each
// relay power trimmed to the ratio-matched value kappa (kappa + 1) /
// (theta^2 |g_n|^2) -- amplifying past the manifold only forwards noise.
// Trimming keeps every budget satisfied and the result never falls below the
// relaxation value q^2 / (theta^2 + q) of the witness.
inline double ps_achieved_snr(const PsProblemData& d, const ChannelRealization& re,
                              const PsWitness& wit, const RVec& rho, RVec* p_out = nullptr) {
    const int n = d.n;
    if (static_cast<int>(rho.size()) != n || static_cast<int>(wit.p.size()) != n)
        throw error("ps_achieved_snr: dimension mismatch");
    const double th2 = wit.theta * wit.theta;
    double num = 0.0, den = 1.0;
    if (p_out) p_out->assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const double recv = std::max(0.0, quad_form(wit.w, re.f[i]));
        const double y2 = std::max(0.0, (1.0 - rho[i]) * d.p_o * recv);
        double p = wit.p[i];
        if (th2 * d.g2[i] > 0.0) {
            const double kap = std::max(0.0, wit.kappa[i]);
            p = std::min(p, kap * (kap + 1.0) / (th2 * d.g2[i]));
        } else {
            p = 0.0;  // a relay the destination cannot hear stays silent
        }
        if (p_out) (*p_out)[i] = p;
        const double x2 = p / (1.0 + y2);
        num += std::sqrt(x2 * y2 * d.g2[i]);
        den += x2 * d.g2[i];
    }
    return num * num / den;
}

inline PsSolution optimize_ps(const NetworkScenario& sc, const ChannelRealization& re,
                              const PsOptions& opt = {}) {
    sc.validate();
    const int n = static_cast<int>(re.g.size());
    const double eps = opt.eps > 0.0 ? opt.eps : sc.epsilon;
    std::vector<MomentAmbiguitySet> ambs;
    for (int m = 0; m < sc.m_cues; ++m) ambs.push_back(ambiguity_from(re, sc, m));
    const PsProblemData data = build_ps_matrices(re, sc.p_o());

    PsSolution best;
    best.rho.assign(n, 0.0);
    best.p.assign(n, 0.0);
    best.kappa.assign(n, 0.0);
    best.w = CMat(data.k);
    best.wbar = CMat(data.k);

    // box top: Y <= p_o sum ||f_n||^2 outright, and X caps at the harvest
    // every relay could forward if all received power were energy
    double fbar = 0.0, gmax = 0.0;
    for (int i = 0; i < n; ++i) {
        fbar += data.f2[i];
        gmax = std::max(gmax, data.g2[i]);
    }
    double x0 = sc.eta * gmax * fbar * data.p_o;
    if (sc.eh_model == EhModel::nonlinear) {
        const NonlinearEhModel eh = nonlinear_model(sc);
        x0 = 0.0;
        for (int i = 0; i < n; ++i)
            x0 += data.g2[i] * nonlinear_eh(data.p_o * data.f2[i], eh, i);
    }
    const double y0 = fbar * data.p_o;
    if (!(x0 > 1e-300) || !(y0 > 1e-300)) {
        best.converged = true;  // no relay can both receive and be heard
        return best;
    }

    PsOracle oracle;
    oracle.data = &data;
    oracle.sc = &sc;
    oracle.re = &re;
    oracle.ambs = &ambs;
    oracle.opt = opt.oracle;
    MonotonicOptions mo;
    mo.eps = eps;
    mo.max_iterations = opt.max_iterations;
    auto tr = run_monotonic({x0, y0}, ps_relaxed_snr, oracle, mo);
    best.oracle_queries = oracle.queries;
    best.converged = tr.converged;
    best.iterations = tr.iterations;

    if (tr.has_witness) {
        best.X = tr.incumbent[0];
        best.Y = tr.incumbent[1];
        best.rho = recover_ps_ratios(tr.witness.w, tr.witness.wbar, re.f);
        best.gamma = ps_achieved_snr(data, re, tr.witness, best.rho, &best.p);
        best.throughput = ps_throughput_of(best.gamma, opt.halve_throughput);
        best.kappa = tr.witness.kappa;
        best.w = tr.witness.w;
        best.wbar = tr.witness.wbar;
        best.theta = tr.witness.theta;
    }
    best.trace = std::move(tr);
    return best;
}

}  // namespace wpmr
