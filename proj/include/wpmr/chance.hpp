#pragma once

// Distributionally-robust interference constraint.  The interference a power
// vector p causes at a coexisting user through the cross channel z is
// sum_n |z_n|^2 p_n; only the first and second moments of z are known, and the
// constraint bounds the violation probability sup_P P(interference >= phi_bar)
// over every distribution P matching those moments.
//
// The worst case has an exact semidefinite dual: with Sigma the lifted moment
// matrix [[S + u u^H, u], [u^H, 1]],
//
//     B(c | Sigma) = min  Tr(Sigma M)
//                    s.t. M >= [[nu D(c.c), 0], [0, 1 - nu phi_bar]],
//                         M >= 0, nu >= 0,
//
// and the positively-scaled (homogenized) variant of the same system embeds
// as LMI blocks inside larger designs, with the diagonal D(.) slot holding
// affine power expressions and the bound Tr(Sigma M) <= nu zeta.
//
// Complex moments are handled through the real embedding of Sigma; when Sigma
// is real the blocks stay at the original dimension.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "wpmr/common.hpp"
#include "wpmr/conic.hpp"
#include "wpmr/linalg.hpp"
#include "wpmr/scenario.hpp"

namespace wpmr {

struct MomentAmbiguitySet {
    CMat sigma;            // (n+1) x (n+1) lifted moment matrix, PSD, corner 1
    double phi_bar = 1.0;  // interference threshold (normalized)
    double zeta = 0.3;     // admissible violation probability

    int n() const { return sigma.dim() - 1; }

    void validate() const {
        if (sigma.dim() < 2) throw error("ambiguity set: sigma must be at least 2x2");
        if (!(phi_bar > 0.0)) throw error("ambiguity set: phi_bar must be > 0");
        if (!(zeta > 0.0 && zeta <= 1.0)) throw error("ambiguity set: zeta must be in (0, 1]");
        const int d = sigma.dim();
        if (std::abs(sigma(d - 1, d - 1) - cxd(1.0, 0.0)) > 1e-9)
            throw error("ambiguity set: bottom-right entry of sigma must be 1");
        if (!is_psd(sigma)) throw error("ambiguity set: sigma must be PSD");
    }
};

inline MomentAmbiguitySet ambiguity_from(const ChannelRealization& r, const NetworkScenario& sc,
                                         int cue) {
    if (cue < 0 || cue >= static_cast<int>(r.sigma.size()))
        throw error("ambiguity_from: bad cue index");
    return MomentAmbiguitySet{r.sigma[cue], sc.phi_bar, sc.zeta};
}

namespace detail {

struct ChanceLayout {
    bool embedded = false;  // complex sigma handled via real embedding
    int half = 0;           // modeling dimension n+1
    int d = 0;              // PSD dimension used in the program
    RMat sigma_obj;         // coefficient matrix for Tr(Sigma M)
    double trace_scale = 1.0;
};

inline ChanceLayout chance_layout(const MomentAmbiguitySet& amb) {
    ChanceLayout lo;
    lo.half = amb.sigma.dim();
    double imag_max = 0.0, abs_max = 1.0;
    for (int i = 0; i < lo.half; ++i)
        for (int j = 0; j < lo.half; ++j) {
            imag_max = std::max(imag_max, std::abs(amb.sigma(i, j).imag()));
            abs_max = std::max(abs_max, std::abs(amb.sigma(i, j)));
        }
    lo.embedded = imag_max > 1e-14 * abs_max;
    if (lo.embedded) {
        lo.d = 2 * lo.half;
        lo.sigma_obj = real_embed(amb.sigma);
        lo.trace_scale = 0.5;  // Tr(embed(A) embed(B)) doubles Tr(A B)
    } else {
        lo.d = lo.half;
        lo.sigma_obj = RMat(lo.half, lo.half);
        for (int i = 0; i < lo.half; ++i)
            for (int j = 0; j < lo.half; ++j) lo.sigma_obj(i, j) = amb.sigma(i, j).real();
    }
    return lo;
}

// Relay index owning diagonal slot i, or -1 for the homogenization slot.
inline int slot_relay(const ChanceLayout& lo, int i) {
    const int r = i % lo.half;
    return (r == lo.half - 1) ? -1 : r;
}

}  // namespace detail

// Worst-case probability that sum_n |z_n|^2 c_n^2 >= phi_bar over all
// distributions matching the moments in `amb`; always in [0, 1] and monotone
// nondecreasing in each |c_n|.
inline double worst_case_violation(const RVec& c, const MomentAmbiguitySet& amb,
                                   const SolverOptions& opts = {}) {
    amb.validate();
    const int n = amb.n();
    if (static_cast<int>(c.size()) != n) throw error("worst_case_violation: c has wrong length");
    for (double v : c)
        if (v < 0.0) throw error("worst_case_violation: c must be nonnegative");

    const detail::ChanceLayout lo = detail::chance_layout(amb);
    ConicProblem cp;
    const int mb = cp.add_psd_block(lo.d);
    const int tb = cp.add_psd_block(lo.d);  // slack for the domination LMI
    const VarRef nu = cp.add_nonneg(1);
    for (int i = 0; i < lo.d; ++i)
        for (int j = 0; j <= i; ++j) {
            const bool diag = (i == j);
            const int rel = diag ? detail::slot_relay(lo, i) : 0;
            const double rhs = (diag && rel < 0) ? 1.0 : 0.0;
            const int row = cp.add_eq(rhs);
            cp.add_psd_coef(row, mb, i, j, 1.0);
            cp.add_psd_coef(row, tb, i, j, -1.0);
            if (diag) {
                if (rel >= 0)
                    cp.add_coef(row, nu, 0, -c[rel] * c[rel]);
                else
                    cp.add_coef(row, nu, 0, amb.phi_bar);
            }
        }
    cp.obj_psd_matrix(mb, lo.sigma_obj, lo.trace_scale);

    Solution s = cp.solve(opts);
    if (!s.usable()) {
        SolverOptions dump = opts;
        dump.dump_standard_form = true;
        if (dump.dump_path == SolverOptions{}.dump_path) dump.dump_path = "wpmr_chance_dump.txt";
        cp.solve(dump);
        throw error(std::string("worst_case_violation: solver failed (") + to_string(s.status) +
                    "), program dumped to " + dump.dump_path);
    }
    return std::clamp(s.objective, 0.0, 1.0);
}

// Handles to the constraint blocks one call to add_chance_blocks emitted.
struct ChanceFragment {
    bool active = false;    // false when zeta >= 1 made the constraint vacuous
    int m_block = -1;
    int t_block = -1;       // slack block for the domination LMI
    VarRef nu{};
    int m_dim = 0;          // modeling dimension n+1, before any embedding
    bool embedded = false;
    int rows_added = 0;

    // Constraints at the modeling level beyond cone memberships: the
    // domination LMI and the trace bound.
    int modeling_constraints() const { return active ? 2 : 0; }
};

// Emits, for one coexisting user, the homogenized chance-constraint blocks
//
//     M >= [[D(powers), 0], [0, nu - phi_bar]],  M >= 0,  nu >= 0,
//     Tr(Sigma M) <= nu zeta,
//
// where powers[n] is an affine expression for the n-th transmit power in the
// host problem's variables.  With zeta >= 1 the constraint can never bind (a
// probability cannot exceed 1), and because the homogenized system excludes
// the probability-one boundary point it is omitted entirely instead.
inline ChanceFragment add_chance_blocks(ConicProblem& cp, const std::vector<LinExpr>& powers,
                                        const MomentAmbiguitySet& amb) {
    amb.validate();
    const int n = amb.n();
    if (static_cast<int>(powers.size()) != n)
        throw error("add_chance_blocks: powers has wrong length");
    ChanceFragment fr;
    fr.m_dim = n + 1;
    if (amb.zeta >= 1.0) return fr;

    const detail::ChanceLayout lo = detail::chance_layout(amb);
    const int rows0 = cp.num_rows();
    fr.active = true;
    fr.embedded = lo.embedded;
    fr.m_block = cp.add_psd_block(lo.d);
    fr.t_block = cp.add_psd_block(lo.d);
    fr.nu = cp.add_nonneg(1);
    for (int i = 0; i < lo.d; ++i)
        for (int j = 0; j <= i; ++j) {
            const bool diag = (i == j);
            const int rel = diag ? detail::slot_relay(lo, i) : 0;
            const double rhs = (diag && rel < 0) ? -amb.phi_bar : 0.0;
            const int row = cp.add_eq(rhs);
            cp.add_psd_coef(row, fr.m_block, i, j, 1.0);
            cp.add_psd_coef(row, fr.t_block, i, j, -1.0);
            if (diag) {
                if (rel >= 0)
                    cp.add_expr(row, powers[rel], -1.0);
                else
                    cp.add_coef(row, fr.nu, 0, -1.0);
            }
        }
    const int trace_row = cp.add_le(0.0);
    cp.add_psd_matrix_coef(trace_row, fr.m_block, lo.sigma_obj, lo.trace_scale);
    cp.add_coef(trace_row, fr.nu, 0, -amb.zeta);
    fr.rows_added = cp.num_rows() - rows0;
    return fr;
}

struct ViolationEstimate {
    double probability = 0.0;
    double std_error = 0.0;
};

// Fraction of sampled cross channels violating the interference threshold.
// `draw_z` is any callable returning one CVec sample of z.
template <class Sampler>
ViolationEstimate empirical_violation(const RVec& p, Sampler&& draw_z, double phi_bar,
                                      int trials) {
    if (trials < 1) throw error("empirical_violation: trials must be >= 1");
    if (!(phi_bar > 0.0)) throw error("empirical_violation: phi_bar must be > 0");
    for (double v : p)
        if (v < 0.0) throw error("empirical_violation: p must be nonnegative");
    int hits = 0;
    for (int t = 0; t < trials; ++t) {
        const CVec z = draw_z();
        if (z.size() != p.size()) throw error("empirical_violation: sampler dimension mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) s += std::norm(z[i]) * p[i];
        if (s >= phi_bar) ++hits;
    }
    ViolationEstimate est;
    est.probability = static_cast<double>(hits) / trials;
    est.std_error = std::sqrt(est.probability * (1.0 - est.probability) / trials);
    return est;
}

// Circularly-symmetric Gaussian with the given mean and second moment about
// the mean: one member of the ambiguity set, so its violation probability can
// never exceed worst_case_violation (up to sampling noise).
class GaussianMomentSampler {
  public:
    GaussianMomentSampler(CVec u, const CMat& s, Rng& rng)
        : u_(std::move(u)), a_(psd_sqrt(s)), rng_(&rng) {
        if (static_cast<int>(u_.size()) != a_.dim())
            throw error("GaussianMomentSampler: dimension mismatch");
    }

    CVec operator()() {
        const int n = a_.dim();
        CVec w(n);
        for (int i = 0; i < n; ++i) w[i] = rng_->cnormal(1.0);
        CVec z = u_;
        for (int i = 0; i < n; ++i) {
            cxd acc(0.0, 0.0);
            for (int j = 0; j < n; ++j) acc += a_(i, j) * w[j];
            z[i] += acc;
        }
        return z;
    }

  private:
    CVec u_;
    CMat a_;
    Rng* rng_;
};

}  // namespace wpmr
