#pragma once

// Time-switching scheme.  A block of unit length splits into an energy slot
// of length 1-2t and two transmission hops of length t each: the source sends
// an energy beam W_e (trace <= 1, scaled by p_o), each relay n harvests from
// it, then amplifies and forwards the information signal with power p_n =
// c_n^2.  With
//
//     |h_n|^2 = f_n^H W_1 f_n      (first-hop gain under beamformer W_1)
//     B_nn    = |g_n|^2 / (1 + p_o |h_n|^2)
//     a_n     = sqrt(p_o) |h_n| |g_n| / sqrt(1 + p_o |h_n|^2)
//
// the destination SNR under coherent combining is (c^T a)^2 / (1 + c^T B c),
// so throughput is r(t, gamma) = t log2(1 + gamma) over the normal set of
// achievable (t, gamma) pairs.  Feasibility of a scaled target is answered by
// the semidefinite relaxation over C = c c^T:
//
//     max  Tr(C (A - gamma B))     >= gamma  <=>  feasible
//     s.t. C >= 0, W_e >= 0, Tr(W_e) <= 1,
//          t C_nn <= (1 - 2t) eta p_o f_n^H W_e f_n        (per relay)
//          chance blocks on the diagonal of C,
//
// which is tight here because A is rank one with nonnegative weights: for any
// feasible C, c = sqrt(diag C) satisfies the same diagonal constraints and a
// no-smaller objective.

#include <algorithm>
#include <cmath>
#include <limits>
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

enum class W1Strategy { mrt_strongest, uniform, alt_sdr };

struct TsProblemData {
    CMat w1;        // information beamformer, K x K, trace <= 1
    RVec h2;        // |h_n|^2 = f_n^H W_1 f_n
    RVec h_diag;    // |h_n|^2 / (1 + p_o |h_n|^2)
    RVec b_diag;    // |g_n|^2 / (1 + p_o |h_n|^2)
    RVec a;         // amplitude gains; SNR numerator is (c^T a)^2
    RMat a_outer;   // A = a a^T
    double p_o = 0.0;
};

inline TsProblemData build_ts_matrices(const ChannelRealization& re, const CMat& w1,
                                       double p_o) {
    const int n = static_cast<int>(re.g.size());
    if (n == 0 || static_cast<int>(re.f.size()) != n)
        throw error("build_ts_matrices: inconsistent realization");
    const int k = static_cast<int>(re.f[0].size());
    if (w1.dim() != k) throw error("build_ts_matrices: W1 dimension mismatch");
    if (!(p_o > 0.0)) throw error("build_ts_matrices: p_o must be > 0");
    if (!is_psd(w1)) throw error("build_ts_matrices: W1 must be PSD");
    if (w1.trace().real() > 1.0 + 1e-9) throw error("build_ts_matrices: W1 trace must be <= 1");

    TsProblemData d;
    d.w1 = w1;
    d.p_o = p_o;
    d.h2.resize(n);
    d.h_diag.resize(n);
    d.b_diag.resize(n);
    d.a.resize(n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(re.f[i].size()) != k)
            throw error("build_ts_matrices: ragged channel matrix");
        cxd q(0.0, 0.0);
        for (int r = 0; r < k; ++r)
            for (int c = 0; c < k; ++c) q += std::conj(re.f[i][r]) * w1(r, c) * re.f[i][c];
        const double h2 = std::max(0.0, q.real());
        const double g2 = std::norm(re.g[i]);
        const double den = 1.0 + p_o * h2;
        d.h2[i] = h2;
        d.h_diag[i] = h2 / den;
        d.b_diag[i] = g2 / den;
        d.a[i] = std::sqrt(p_o * h2 * g2 / den);
    }
    d.a_outer = RMat(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d.a_outer(i, j) = d.a[i] * d.a[j];
    return d;
}

// Largest achievable SNR ignoring power budgets: max over c of
// (c^T a)^2 / (c^T B c) = sum_n a_n^2 / B_nn; a valid initial gamma bound.
inline double ts_gamma_bound(const TsProblemData& d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.a.size(); ++i)
        if (d.b_diag[i] > 0.0) s += d.a[i] * d.a[i] / d.b_diag[i];
    return s;
}

// Tightens the bound with the chance constraints: restricting the worst case
// to a single active relay shows p_n <= zeta phi_bar / E|z_mn|^2 is necessary,
// and SNR <= (sum_n a_n sqrt(cap_n))^2 for capped powers.
inline double ts_gamma_bound(const TsProblemData& d,
                             const std::vector<MomentAmbiguitySet>& ambs) {
    const double base = ts_gamma_bound(d);
    const int n = static_cast<int>(d.a.size());
    double amp = 0.0;
    for (int i = 0; i < n; ++i) {
        double cap = -1.0;
        for (const MomentAmbiguitySet& amb : ambs) {
            if (amb.zeta >= 1.0) continue;
            const double ez2 = amb.sigma(i, i).real();
            if (ez2 <= 0.0) continue;
            const double c = amb.zeta * amb.phi_bar / ez2;
            cap = cap < 0.0 ? c : std::min(cap, c);
        }
        if (cap < 0.0) return base;  // some relay is unconstrained
        amp += d.a[i] * std::sqrt(cap);
    }
    if (n == 0) return base;
    return std::min(base, amp * amp);
}

struct TsWitness {
    RMat C;      // SDR lift of the relay amplitude vector
    CMat we;     // energy beamformer
    double q = 0.0;
};

// A dual certificate of one relaxation solve, extended parametrically: with
// beta(t) = (1 - 2t) / t, scaling the budget multipliers by t~/t and the
// trace multiplier by beta(t)/beta(t~) keeps the dual feasible at any other
// slot split t and any target gamma >= gamma_from, so
//
//     q(t, gamma) <= k1 * beta(t) + k2        for all t, gamma >= gamma_from.
//
// Since feasibility means q >= gamma, each envelope caps the achievable SNR
// curve, and the pointwise minimum over collected envelopes yields a global
// certified bound on throughput independent of the vertex set.
struct TsEnvelope {
    double gamma_from = 0.0;
    double k1 = 0.0;
    double k2 = 0.0;
    double beta_at = 0.0;  // anchor beta(t~) of the generating solve

    double value(double beta) const { return std::max(gamma_from, k1 * beta + k2); }
};

struct TsFeasibility {
    bool feasible = false;
    double q = 0.0;
    RMat C;
    CMat we;
    std::optional<TsEnvelope> envelope;  // set for usable solves of the exact (linear) budget
};

struct TsOracleOptions {
    SolverOptions solver;
    int sca_rounds = 2;     // successive approximations for the nonlinear harvester
    double margin = 1e-8;   // feasibility margin on q >= gamma
};

namespace detail {

// Recovers the Hermitian K x K matrix represented by a 2K x 2K real block.
inline CMat unembed_hermitian(const RMat& w, int k) { return wpmr::unembed_hermitian(w, k); }

}  // namespace detail

// Feasibility of the scaled target (t, gamma) = lam * z for the relaxation
// above.  With the nonlinear harvester the budget slope is refined by
// successive approximation and the returned design is rescaled so that the
// true logistic budget holds, keeping the verdict conservative.
inline TsFeasibility ts_projection_feasibility(const TsProblemData& d,
                                               const NetworkScenario& sc,
                                               const ChannelRealization& re,
                                               const std::vector<MomentAmbiguitySet>& ambs,
                                               const Vertex& z, double lam,
                                               const TsOracleOptions& opt = {}) {
    if (z.size() != 2) throw error("ts_projection_feasibility: vertex must be (t, gamma)");
    if (!(lam > 0.0 && lam <= 1.0)) throw error("ts_projection_feasibility: lambda in (0, 1]");
    const int n = static_cast<int>(d.a.size());
    const int k = d.w1.dim();
    const double t = lam * z[0];
    const double gamma = lam * z[1];

    TsFeasibility out;
    out.C = RMat(n, n);
    out.we = CMat(k);
    if (gamma <= 1e-15) {
        // zero target SNR needs no transmit power at all
        for (int i = 0; i < k; ++i) out.we(i, i) = 1.0 / k;
        out.feasible = true;
        return out;
    }
    if (1.0 - 2.0 * t <= 1e-12) return out;  // no energy slot left

    const bool nonlinear = sc.eh_model == EhModel::nonlinear;
    const NonlinearEhModel eh = nonlinear ? nonlinear_model(sc) : NonlinearEhModel{};
    RVec slope(n, sc.eta);  // budget slope on the receive power
    // embed(f f^H)/2 measures f^H W_e f exactly for any symmetric 2K block,
    // so the relaxation over unstructured blocks recovers a complex design
    // with the same budget values
    std::vector<RMat> f_outer;
    f_outer.reserve(n);
    for (int i = 0; i < n; ++i) f_outer.push_back(real_embed(CMat::outer(re.f[i])) * 0.5);

    const int rounds = nonlinear ? std::max(1, opt.sca_rounds) : 1;
    for (int round = 0; round < rounds; ++round) {
        ConicProblem cp;
        const int cb = cp.add_psd_block(n);
        const int wb = cp.add_psd_block(2 * k);
        for (int i = 0; i < n; ++i) {
            const int row = cp.add_le(0.0);
            cp.add_psd_coef(row, cb, i, i, t);
            cp.add_psd_matrix_coef(row, wb, f_outer[i], -(1.0 - 2.0 * t) * slope[i] * d.p_o);
        }
        int trace_row = -1;
        {
            trace_row = cp.add_le(2.0);  // Tr(W_e) <= 1 doubled by the embedding
            for (int i = 0; i < 2 * k; ++i) cp.add_psd_coef(trace_row, wb, i, i, 1.0);
        }
        for (const MomentAmbiguitySet& amb : ambs) {
            std::vector<LinExpr> powers(n);
            for (int i = 0; i < n; ++i) powers[i].add_psd(cb, i, i, 1.0);
            add_chance_blocks(cp, powers, amb);
        }
        RMat obj = d.a_outer;
        for (int i = 0; i < n; ++i) obj(i, i) -= gamma * d.b_diag[i];
        cp.set_maximize(true);
        cp.obj_psd_matrix(cb, obj);

        const Solution s = cp.solve(opt.solver);
        if (!s.usable()) {
            logf(LogLevel::debug, "ts oracle: solver %s at t=%g gamma=%g",
                 to_string(s.status), t, gamma);
            return out;
        }
        out.C = s.psd(cb);
        out.we = detail::unembed_hermitian(s.psd(wb), k);
        out.q = s.objective;

        if (!nonlinear && !s.row_duals.empty()) {
            // the linear budget is exact, so the dual extends to an envelope;
            // padding absorbs the solver's residual dual infeasibility
            const double tau = std::max(0.0, s.row_dual(trace_row));
            const double beta = (1.0 - 2.0 * t) / t;
            const double pad =
                10.0 * s.kkt.max_residual() * (1.0 + std::abs(out.q) + 2.0 * tau) + 1e-12;
            if (beta > 1e-12 && std::isfinite(tau) && std::isfinite(out.q) && std::isfinite(pad))
                out.envelope =
                    TsEnvelope{gamma, (2.0 * tau + pad) / beta, out.q + pad - 2.0 * tau, beta};
        }

        if (!nonlinear) break;
        // refine the budget slope around the receive power this design implies
        bool moved = false;
        for (int i = 0; i < n; ++i) {
            cxd quad(0.0, 0.0);
            for (int r = 0; r < k; ++r)
                for (int c = 0; c < k; ++c)
                    quad += std::conj(re.f[i][r]) * out.we(r, c) * re.f[i][c];
            const double rx = d.p_o * std::max(0.0, quad.real());
            if (rx > 1e-12) {
                const double next = nonlinear_eh(rx, eh, i) / rx;
                if (std::abs(next - slope[i]) > 1e-6 * std::max(slope[i], next)) moved = true;
                slope[i] = std::max(next, 1e-12);
            }
        }
        if (!moved) break;
    }

    if (nonlinear) {
        // enforce the true logistic budget by shrinking relay powers
        RVec s_n(n, 1.0);
        for (int i = 0; i < n; ++i) {
            cxd q(0.0, 0.0);
            for (int r = 0; r < k; ++r)
                for (int c = 0; c < k; ++c) q += std::conj(re.f[i][r]) * out.we(r, c) * re.f[i][c];
            const double rx = d.p_o * std::max(0.0, q.real());
            const double budget = (1.0 - 2.0 * t) * nonlinear_eh(rx, eh, i);
            const double used = t * std::max(0.0, out.C(i, i));
            if (used > budget && used > 0.0) s_n[i] = std::max(0.0, budget / used);
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out.C(i, j) *= std::sqrt(s_n[i] * s_n[j]);
        double q = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) q += out.C(i, j) * d.a_outer(i, j);
        for (int i = 0; i < n; ++i) q -= gamma * d.b_diag[i] * out.C(i, i);
        out.q = q;
    }

    out.feasible = out.q >= gamma - opt.margin * std::max(1.0, gamma);
    return out;
}

struct TsOracle {
    using Witness = TsWitness;
    const TsProblemData* data = nullptr;
    const NetworkScenario* sc = nullptr;
    const ChannelRealization* re = nullptr;
    const std::vector<MomentAmbiguitySet>* ambs = nullptr;
    TsOracleOptions opt;
    long long queries = 0;

    // certified-bound state: envelopes collected from every usable solve, the
    // SNR box top they are capped with, and a refinement budget
    double gamma_cap = std::numeric_limits<double>::infinity();
    std::vector<TsEnvelope> envelopes;
    int refine_calls_left = 12;

    QueryResult<TsWitness> query(const Vertex& z, double lam) {
        ++queries;
        TsFeasibility f = ts_projection_feasibility(*data, *sc, *re, *ambs, z, lam, opt);
        note_envelope(f);
        return {f.feasible, TsWitness{std::move(f.C), std::move(f.we), f.q}};
    }

    // Keeps an envelope only when it tightens the family somewhere: on a
    // fixed probe grid, or near its own anchor, where a tangent envelope
    // improves over a region narrower than the probe spacing.  Dropping
    // redundant members never loosens validity.
    void note_envelope(const TsFeasibility& f) {
        if (!f.envelope) return;
        if (probe_min_.empty()) probe_min_.assign(kProbes, std::numeric_limits<double>::infinity());
        bool improves = false;
        for (int i = 0; i < kProbes; ++i) {
            const double v = f.envelope->value(probe_beta(i));
            // envelope values are nonnegative, so this form also accepts
            // against an untouched (infinite) probe minimum
            if (v < probe_min_[i] * (1.0 - 1e-12) - 1e-12) {
                probe_min_[i] = v;
                improves = true;
            }
        }
        if (!improves) {
            double family = gamma_cap;
            for (const TsEnvelope& e : envelopes)
                family = std::min(family, e.value(f.envelope->beta_at));
            const double own = f.envelope->value(f.envelope->beta_at);
            improves = own < family - 1e-9 * (1.0 + std::abs(own));
        }
        if (improves) envelopes.push_back(*f.envelope);
    }

    // Certified bound on the achievable SNR at slot split t (cap included).
    double envelope_gamma_bound(double beta) const {
        double g = gamma_cap;
        for (const TsEnvelope& e : envelopes) g = std::min(g, e.value(beta));
        return std::max(g, 0.0);
    }

    // Global certified throughput bound: branch-and-bound over t in (0, 1/2).
    // A cell [tl, th] is bounded by th * log2(1 + gamma_bound(beta(tl)))
    // because beta decreases in t, so splitting the top cell until it is
    // narrow leaves the heap maximum as a valid global bound.
    double certified_upper() {
        if (envelopes.empty() || !std::isfinite(gamma_cap))
            return std::numeric_limits<double>::infinity();
        struct Cell {
            double bound, tl, th;
            bool operator<(const Cell& o) const { return bound < o.bound; }
        };
        auto cell_of = [&](double tl, double th) {
            const double beta = tl <= 0.0 ? 1e300 : (1.0 - 2.0 * tl) / tl;
            return Cell{th * std::log2(1.0 + envelope_gamma_bound(beta)), tl, th};
        };
        std::priority_queue<Cell> heap;
        const int seed_cells = 64;
        for (int i = 0; i < seed_cells; ++i)
            heap.push(cell_of(0.5 * i / seed_cells, 0.5 * (i + 1) / seed_cells));
        for (int split = 0; split < 3000; ++split) {
            const Cell top = heap.top();
            if (top.th - top.tl < 1e-10) break;
            heap.pop();
            const double mid = 0.5 * (top.tl + top.th);
            heap.push(cell_of(top.tl, mid));
            heap.push(cell_of(mid, top.th));
        }
        last_argmax_t_ = 0.5 * (heap.top().tl + heap.top().th);
        return std::max(heap.top().bound, 0.0);
    }

    // Polishes the incumbent with a short root search for the boundary SNR at
    // the most promising slot split: g(gamma) = q(t, gamma) - gamma has slope
    // <= -1, so each solve brackets the root within |g| and a handful of
    // safeguarded steps lands a feasible target within solver accuracy.
    std::optional<std::pair<Vertex, TsWitness>> refine_incumbent(const Vertex& /*z*/,
                                                                 double /*r_best*/) {
        if (refine_calls_left <= 0 || !(last_argmax_t_ > 0.0) || data == nullptr)
            return std::nullopt;
        --refine_calls_left;
        const double t = std::clamp(last_argmax_t_, 1e-9, 0.5 - 1e-9);
        double ghi = envelope_gamma_bound((1.0 - 2.0 * t) / t);
        if (!(ghi > 1e-12)) return std::nullopt;

        double glo = 0.0;
        bool have = false;
        TsFeasibility best;
        double probe = ghi * (1.0 - 1e-9);
        for (int j = 0; j < 6 && probe > 1e-12; ++j) {
            ++queries;
            TsFeasibility fs =
                ts_projection_feasibility(*data, *sc, *re, *ambs, Vertex{t, probe}, 1.0, opt);
            note_envelope(fs);
            if (fs.feasible) {
                if (probe > glo) {
                    glo = probe;
                    best = std::move(fs);
                    have = true;
                }
                ghi = std::min(ghi, best.q + 1e-7 * std::max(1.0, best.q));
                const double step = std::max(best.q - probe, 0.0);
                const double next = std::min(probe + 0.9 * step, 0.5 * (probe + ghi));
                if (next <= glo * (1.0 + 1e-12) + 1e-15) break;
                probe = next;
            } else {
                ghi = probe;
                const double next = have ? 0.5 * (glo + ghi) : std::max(fs.q, 0.5 * probe);
                if (!(next > 1e-12) || next >= probe * (1.0 - 1e-12)) break;
                probe = next;
            }
            if (have && ghi - glo <= 1e-9 * std::max(1.0, glo)) break;
        }
        if (!have) return std::nullopt;
        // back off a hair so the returned target re-solves feasible despite jitter
        const double gret = std::max(0.0, glo - 2e-9 * std::max(1.0, glo));
        return std::make_pair(Vertex{t, gret}, TsWitness{best.C, best.we, best.q});
    }

    static constexpr int kProbes = 24;
    static double probe_beta(int i) {
        // log-spaced beta probes covering t from ~0.499 down to ~1e-4
        return 4e-3 * std::pow(10.0, 6.4 * i / (kProbes - 1));
    }
    std::vector<double> probe_min_;
    double last_argmax_t_ = -1.0;
};

// --- rank-one extraction -----------------------------------------------------

struct TsExtractContext {
    RMat a_mat;                             // SNR numerator quadratic form
    RVec b_diag;                            // SNR denominator diagonal
    RVec cap;                               // per-relay bound on c_n^2; negative means none
    std::vector<MomentAmbiguitySet> ambs;   // chance sets to respect (may be empty)
    double target_snr = 0.0;
    SolverOptions solver;
};

struct TsExtraction {
    RVec c;
    bool rank_one = false;
    double snr = 0.0;
};

namespace detail {

inline double ts_quad(const RMat& m, const RVec& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) acc += m(i, j) * x[i] * x[j];
    return acc;
}

inline double ts_snr(const TsExtractContext& ctx, const RVec& x) {
    double den = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) den += ctx.b_diag[i] * x[i] * x[i];
    return ts_quad(ctx.a_mat, x) / den;
}

// Largest scale of x allowed by caps and chance constraints; 1 when nothing
// binds at the raw draw and no cap allows growth.
inline double ts_best_scale(const TsExtractContext& ctx, const RVec& x) {
    double s = 1e300;
    bool bounded = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (ctx.cap[i] >= 0.0 && x[i] > 0.0) {
            s = std::min(s, std::sqrt(std::max(0.0, ctx.cap[i]) / (x[i] * x[i])));
            bounded = true;
        }
    }
    if (!bounded) s = 1.0;
    auto chance_ok = [&](double scale) {
        RVec y = x;
        for (double& v : y) v *= scale;
        for (const MomentAmbiguitySet& amb : ctx.ambs)
            if (amb.zeta < 1.0 && worst_case_violation(y, amb, ctx.solver) > amb.zeta + 1e-6)
                return false;
        return true;
    };
    if (chance_ok(s)) return s;
    double lo = 0.0, hi = s;
    for (int it = 0; it < 30; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (chance_ok(mid)) lo = mid;
        else hi = mid;
    }
    return lo;
}

}  // namespace detail

// Recovers a nonnegative amplitude vector from the SDR lift.  Numerically
// rank-one lifts factor directly; otherwise 200 rectified Gaussian draws from
// C (plus sqrt(diag C), which is optimal for rank-one quadratic forms) are
// each scaled to the constraint boundary and the best survivor wins.
inline TsExtraction extract_rank_one(const RMat& C, const TsExtractContext& ctx, Rng& rng,
                                     int samples = 200) {
    const int n = C.rows();
    if (C.cols() != n || static_cast<int>(ctx.cap.size()) != n)
        throw error("extract_rank_one: dimension mismatch");
    TsExtraction out;
    out.c.assign(n, 0.0);

    RMat cs = C;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) {
            const double v = 0.5 * (cs(i, j) + cs(j, i));
            cs(i, j) = cs(j, i) = v;
        }
    // matches the oracle feasibility margin: targets certified only up to
    // this slack must not fail extraction
    const double snr_floor =
        ctx.target_snr * (1.0 - 1e-6) - 1e-8 * std::max(1.0, ctx.target_snr);

    const RealEigResult eig = eig_symmetric(cs);
    const double l1 = eig.values.back();
    if (l1 <= 1e-14) {
        if (snr_floor > 0.0)
            throw error("extract_rank_one: lift is zero but target SNR is positive");
        return out;  // C = 0 extracts the zero vector
    }
    const double l2 = n > 1 ? std::max(0.0, eig.values[n - 2]) : 0.0;

    std::vector<RVec> candidates;
    if (l2 / l1 <= 1e-6) {
        RVec c(n);
        for (int i = 0; i < n; ++i) c[i] = std::sqrt(l1) * std::abs(eig.vectors(i, n - 1));
        candidates.push_back(std::move(c));
        out.rank_one = true;
    } else {
        RVec d(n);
        for (int i = 0; i < n; ++i) d[i] = std::sqrt(std::max(0.0, cs(i, i)));
        candidates.push_back(std::move(d));
        // square root factor for sampling xi ~ (0, C)
        RMat root(n, n);
        for (int k = 0; k < n; ++k) {
            const double r = std::sqrt(std::max(0.0, eig.values[k]));
            if (r == 0.0) continue;
            for (int i = 0; i < n; ++i) root(i, k) = r * eig.vectors(i, k);
        }
        for (int s = 0; s < samples; ++s) {
            RVec w(n), x(n, 0.0);
            for (double& v : w) v = rng.normal();
            for (int i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int k = 0; k < n; ++k) acc += root(i, k) * w[k];
                x[i] = std::abs(acc);
            }
            candidates.push_back(std::move(x));
        }
    }

    double best = 0.0;  // the zero vector is always admissible
    for (RVec& x : candidates) {
        // per-coordinate clip to the caps first; the uniform scale below can
        // then only shrink further (a clipped coordinate pins the ratio at 1)
        for (std::size_t i = 0; i < x.size(); ++i)
            if (ctx.cap[i] >= 0.0)
                x[i] = std::min(x[i], std::sqrt(std::max(0.0, ctx.cap[i])));
        const double s = detail::ts_best_scale(ctx, x);
        if (s <= 0.0) continue;
        for (double& v : x) v *= s;
        const double snr = detail::ts_snr(ctx, x);
        if (snr > best) {
            best = snr;
            out.c = x;
            out.snr = snr;
        }
    }
    if (best < snr_floor) {
        double tr = 0.0;
        for (int i = 0; i < n; ++i) tr += cs(i, i);
        throw error("extract_rank_one: no candidate reached the target SNR " +
                    std::to_string(ctx.target_snr) + " (best " + std::to_string(best) +
                    ", Tr C = " + std::to_string(tr) + "); relaxation gap too large");
    }
    return out;
}

// --- information beamformer --------------------------------------------------

// Heuristic W_1 updates; each keeps Tr(W_1) <= 1.  `c` weights relays by
// their current amplitude (pass an empty vector for the first round).
inline CMat update_info_beamformer(const ChannelRealization& re, const RVec& c,
                                   W1Strategy strategy) {
    const int n = static_cast<int>(re.f.size());
    if (n == 0) throw error("update_info_beamformer: empty realization");
    const int k = static_cast<int>(re.f[0].size());
    RVec w(n, 1.0);
    if (!c.empty()) {
        if (static_cast<int>(c.size()) != n)
            throw error("update_info_beamformer: c has wrong length");
        for (int i = 0; i < n; ++i) w[i] = c[i] * c[i];
        double m = 0.0;
        for (double v : w) m = std::max(m, v);
        if (m <= 0.0) w.assign(n, 1.0);
    }

    switch (strategy) {
        case W1Strategy::uniform: {
            CMat out(k);
            for (int i = 0; i < k; ++i) out(i, i) = 1.0 / k;
            return out;
        }
        case W1Strategy::mrt_strongest: {
            int star = 0;
            double best = -1.0;
            for (int i = 0; i < n; ++i) {
                double f2 = 0.0;
                for (const cxd& v : re.f[i]) f2 += std::norm(v);
                const double score = w[i] * f2 * std::norm(re.g[i]);
                if (score > best + 1e-15 * std::max(1.0, best)) {
                    best = score;
                    star = i;
                }
            }
            double f2 = 0.0;
            for (const cxd& v : re.f[star]) f2 += std::norm(v);
            CMat out(k);
            if (f2 > 0.0) {
                for (int r = 0; r < k; ++r)
                    for (int cidx = 0; cidx < k; ++cidx)
                        out(r, cidx) = re.f[star][r] * std::conj(re.f[star][cidx]) / f2;
            } else {
                for (int i = 0; i < k; ++i) out(i, i) = 1.0 / k;
            }
            return out;
        }
        case W1Strategy::alt_sdr: {
            CMat sum(k);
            for (int i = 0; i < n; ++i) {
                const double wi = w[i] * std::norm(re.g[i]);
                for (int r = 0; r < k; ++r)
                    for (int cidx = 0; cidx < k; ++cidx)
                        sum(r, cidx) += wi * re.f[i][r] * std::conj(re.f[i][cidx]);
            }
            const EigResult e = eig_hermitian(sum);
            CMat out(k);
            if (e.values.back() <= 1e-300) {
                for (int i = 0; i < k; ++i) out(i, i) = 1.0 / k;
                return out;
            }
            for (int r = 0; r < k; ++r)
                for (int cidx = 0; cidx < k; ++cidx)
                    out(r, cidx) = e.vectors(r, k - 1) * std::conj(e.vectors(cidx, k - 1));
            return out;
        }
    }
    throw error("update_info_beamformer: unknown strategy");
}

// --- driver ------------------------------------------------------------------

struct TsOptions {
    W1Strategy strategy = W1Strategy::mrt_strongest;
    int w1_rounds = 3;
    double eps = 0.0;  // 0 -> scenario epsilon
    int max_iterations = 500;
    TsOracleOptions oracle;
    int extract_samples = 200;
};

struct TsSolution {
    double t = 0.0;
    double gamma = 0.0;
    double throughput = 0.0;  // t log2(1 + gamma), per unit bandwidth
    RVec c;                   // relay amplitudes, p_n = c_n^2
    RVec p;
    CMat w1;
    CMat we;
    RMat C;
    bool rank_one = false;
    bool converged = false;
    int iterations = 0;
    long long oracle_queries = 0;
    MonotonicTrace<TsWitness> trace;
};

inline double ts_throughput(const Vertex& z) {
    return z[0] * std::log2(1.0 + z[1]);
}

inline TsSolution optimize_ts(const NetworkScenario& sc, const ChannelRealization& re,
                              const TsOptions& opt = {}) {
    sc.validate();
    const int n = static_cast<int>(re.g.size());
    const double eps = opt.eps > 0.0 ? opt.eps : sc.epsilon;
    std::vector<MomentAmbiguitySet> ambs;
    for (int m = 0; m < sc.m_cues; ++m) ambs.push_back(ambiguity_from(re, sc, m));
    Rng rng(substream_seed(sc.seed, 0x7453u));

    TsSolution best;
    best.c.assign(n, 0.0);
    best.p.assign(n, 0.0);
    RVec c_ref;  // empty: uniform relay weighting on the first round
    CMat w1 = update_info_beamformer(re, c_ref, opt.strategy);
    best.w1 = w1;
    long long total_queries = 0;

    for (int round = 0; round < std::max(1, opt.w1_rounds); ++round) {
        const TsProblemData data = build_ts_matrices(re, w1, sc.p_o());
        const double gbound = ts_gamma_bound(data, ambs);
        if (gbound <= 1e-15) break;  // no second hop at all

        TsOracle oracle;
        oracle.data = &data;
        oracle.sc = &sc;
        oracle.re = &re;
        oracle.ambs = &ambs;
        oracle.opt = opt.oracle;
        oracle.gamma_cap = 1.01 * gbound;
        MonotonicOptions mo;
        mo.eps = eps;
        mo.max_iterations = opt.max_iterations;
        auto tr = run_monotonic({0.5, 1.01 * gbound}, ts_throughput, oracle, mo);
        total_queries += oracle.queries;

        if (!tr.has_witness || tr.r_lower <= best.throughput + 1e-12) {
            // this W1 did not improve the incumbent; keep the previous result
            if (round == 0) {
                best.trace = std::move(tr);
                best.converged = best.trace.converged;
                best.iterations = best.trace.iterations;
            }
            break;
        }

        const double t_star = tr.incumbent[0];
        const double gamma_star = tr.incumbent[1];
        TsExtractContext ctx;
        ctx.a_mat = data.a_outer;
        ctx.b_diag = data.b_diag;
        ctx.cap.assign(n, 0.0);
        const bool nonlinear = sc.eh_model == EhModel::nonlinear;
        const NonlinearEhModel eh = nonlinear ? nonlinear_model(sc) : NonlinearEhModel{};
        for (int i = 0; i < n; ++i) {
            cxd q(0.0, 0.0);
            const int k = w1.dim();
            for (int r = 0; r < k; ++r)
                for (int cc = 0; cc < k; ++cc)
                    q += std::conj(re.f[i][r]) * tr.witness.we(r, cc) * re.f[i][cc];
            const double rx = sc.p_o() * std::max(0.0, q.real());
            const double harvested = nonlinear ? nonlinear_eh(rx, eh, i) : sc.eta * rx;
            ctx.cap[i] = t_star > 0.0 ? (1.0 - 2.0 * t_star) * harvested / t_star : 0.0;
        }
        ctx.ambs = ambs;
        ctx.target_snr = gamma_star;
        ctx.solver = opt.oracle.solver;

        const TsExtraction ex = extract_rank_one(tr.witness.C, ctx, rng, opt.extract_samples);
        const double gamma_ach = std::max(gamma_star, ex.snr);
        const double rate = t_star * std::log2(1.0 + gamma_ach);
        if (rate > best.throughput) {
            best.t = t_star;
            best.gamma = gamma_ach;
            best.throughput = rate;
            best.c = ex.c;
            best.p.resize(n);
            for (int i = 0; i < n; ++i) best.p[i] = ex.c[i] * ex.c[i];
            best.w1 = w1;
            best.we = tr.witness.we;
            best.C = tr.witness.C;
            best.rank_one = ex.rank_one;
            best.converged = tr.converged;
            best.iterations = tr.iterations;
            best.trace = std::move(tr);
        }

        if (round + 1 >= std::max(1, opt.w1_rounds)) break;
        c_ref = best.c;
        const CMat w1_next = update_info_beamformer(re, c_ref, opt.strategy);
        double diff = 0.0;
        for (int r = 0; r < w1.dim(); ++r)
            for (int cc = 0; cc < w1.dim(); ++cc) diff += std::abs(w1_next(r, cc) - w1(r, cc));
        if (diff < 1e-12) break;
        w1 = w1_next;
    }
    best.oracle_queries = total_queries;
    return best;
}

}  // namespace wpmr
