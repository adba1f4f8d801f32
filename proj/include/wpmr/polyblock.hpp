#pragma once

// Monotonic optimization over a normal (downward-closed) feasible set Omega
// in the nonnegative orthant: maintain an outer polyblock approximation given
// by its maximal vertices, project the best vertex onto the upper boundary of
// Omega along its ray, and cut the polyblock just above the projection.  The
// objective must be coordinatewise nondecreasing, nonnegative, and zero
// whenever a coordinate is zero.
//
// The boundary projection comes from a caller-supplied oracle in one of two
// shapes: a membership query `query(z, lambda) -> QueryResult` answered by
// bisection, or a direct `project(z, eps) -> Projection` when the scheme can
// compute the scaling in closed form from one subproblem solve.  Oracles
// carry a `Witness` payload type describing the feasible design behind a
// projection (beamformers, powers, ...); the engine records the witness of
// the incumbent.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wpmr/common.hpp"

namespace wpmr {

using Vertex = RVec;

namespace detail {

// a >= b coordinatewise
inline bool dominates(const Vertex& a, const Vertex& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] < b[i]) return false;
    return true;
}

inline bool lex_greater(const Vertex& a, const Vertex& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return a[i] > b[i];
    return false;
}

inline void check_vertex(const Vertex& v, const char* who) {
    if (v.empty()) throw error(std::string(who) + ": empty vertex");
    for (double x : v)
        if (!std::isfinite(x) || x < 0.0) throw error(std::string(who) + ": coords must be finite and >= 0");
}

}  // namespace detail

// Union of boxes [0, v] over the maximal vertices v.
struct Polyblock {
    std::vector<Vertex> vertices;

    bool contains(const Vertex& x) const {
        for (const Vertex& v : vertices)
            if (detail::dominates(v, x)) return true;
        return false;
    }
};

template <class F>
const Vertex& best_vertex(const Polyblock& p, F&& objective) {
    if (p.vertices.empty()) throw error("best_vertex: empty polyblock");
    const Vertex* best = &p.vertices.front();
    double r_best = objective(*best);
    for (std::size_t i = 1; i < p.vertices.size(); ++i) {
        const double r = objective(p.vertices[i]);
        if (r > r_best || (r == r_best && detail::lex_greater(p.vertices[i], *best))) {
            best = &p.vertices[i];
            r_best = r;
        }
    }
    return *best;
}

// Removes the part of p strictly dominating o from every box reaching past o:
// each vertex v >= o is replaced by the d vertices v - (v_i - o_i) e_i, and
// dominated or duplicate vertices are pruned.  A coordinate with v_i = o_i
// reproduces v itself, which the pruning then keeps in place of its own
// children; this is exactly the set of points of p not dominating o in that
// coordinate.
inline Polyblock cut_and_update(const Polyblock& p, const Vertex& z, const Vertex& o) {
    detail::check_vertex(z, "cut_and_update");
    detail::check_vertex(o, "cut_and_update");
    if (o.size() != z.size()) throw error("cut_and_update: dimension mismatch");
    if (!detail::dominates(z, o)) throw error("cut_and_update: o must satisfy o <= z");
    if (o == z) throw error("cut_and_update: o must differ from z");

    std::vector<Vertex> cand;
    for (const Vertex& v : p.vertices) {
        if (!detail::dominates(v, o)) {
            cand.push_back(v);
            continue;
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            Vertex w = v;
            w[i] = o[i];
            cand.push_back(std::move(w));
        }
    }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

    Polyblock out;
    for (const Vertex& v : cand) {
        bool keep = true;
        for (const Vertex& w : cand)
            if (&w != &v && detail::dominates(w, v) && w != v) {
                keep = false;
                break;
            }
        if (keep) out.vertices.push_back(v);
    }
    return out;
}

template <class W>
struct QueryResult {
    bool feasible = false;
    W witness{};
};

template <class W>
struct Projection {
    double lambda = 0.0;
    bool has_witness = false;
    W witness{};
};

template <class O>
concept MembershipOracle = requires(O& o, const Vertex& z, double lam) {
    typename O::Witness;
    { o.query(z, lam) } -> std::same_as<QueryResult<typename O::Witness>>;
};

template <class O>
concept DirectProjectionOracle = requires(O& o, const Vertex& z, double eps) {
    typename O::Witness;
    { o.project(z, eps) } -> std::same_as<Projection<typename O::Witness>>;
};

// Optional oracle extras.  An oracle that can certify a global upper bound on
// the objective over the feasible set (e.g. from dual solutions of its
// subproblems) exposes certified_upper(); the engine intersects it with the
// vertex bound, which is what turns the slow tail of tangential cuts into an
// early certificate.  An oracle that can polish the incumbent with a few
// extra subproblem solves exposes refine_incumbent(); returned points must be
// feasible and inside the original box.
template <class O>
concept CertifiedUpperBound = requires(O& o) {
    { o.certified_upper() } -> std::convertible_to<double>;
};

template <class O>
concept IncumbentRefiner = requires(O& o, const Vertex& z, double r) {
    typename O::Witness;
    {
        o.refine_incumbent(z, r)
    } -> std::same_as<std::optional<std::pair<Vertex, typename O::Witness>>>;
};

// Finds lambda within eps of sup{lambda : lambda z feasible}.  Probes lambda
// = 1 first (the common fully-feasible case), then the floor eps; a ray
// infeasible already at the floor reports lambda = 0 and no witness, telling
// the caller to drop the vertex.
template <MembershipOracle O>
Projection<typename O::Witness> bisect_project(O& oracle, const Vertex& z, double eps) {
    detail::check_vertex(z, "bisect_project");
    for (double x : z)
        if (x <= 0.0) throw error("bisect_project: z must be strictly positive");
    if (!(eps > 0.0) || eps >= 1.0) throw error("bisect_project: eps must be in (0, 1)");

    Projection<typename O::Witness> out;
    auto top = oracle.query(z, 1.0);
    if (top.feasible) {
        out.lambda = 1.0;
        out.has_witness = true;
        out.witness = std::move(top.witness);
        return out;
    }
    auto bottom = oracle.query(z, eps);
    if (!bottom.feasible) return out;

    out.has_witness = true;
    out.witness = std::move(bottom.witness);
    double lo = eps, hi = 1.0;
    while (hi - lo > eps) {
        const double mid = 0.5 * (lo + hi);
        auto q = oracle.query(z, mid);
        if (q.feasible) {
            lo = mid;
            out.witness = std::move(q.witness);
        } else {
            hi = mid;
        }
    }
    out.lambda = lo;
    return out;
}

struct MonotonicOptions {
    double eps = 1e-5;        // stop when r_upper - r_lower < eps
    double bisect_eps = 0.0;  // 0 -> eps / 10
    int max_iterations = 500;
};

struct TraceRow {
    int iteration = 0;
    double r_upper = 0.0;
    double r_lower = 0.0;
    double lambda = 0.0;
    Vertex vertex;  // the vertex chosen this iteration
};

template <class W>
struct MonotonicTrace {
    std::vector<TraceRow> rows;
    Vertex incumbent;
    bool has_witness = false;
    W witness{};
    double r_upper = 0.0;
    double r_lower = 0.0;
    bool converged = false;
    int iterations = 0;

    std::string to_csv() const {
        std::string out = "iteration,r_upper,r_lower,lambda";
        const std::size_t d = rows.empty() ? incumbent.size() : rows.front().vertex.size();
        for (std::size_t i = 0; i < d; ++i) out += ",v" + std::to_string(i + 1);
        out += "\n";
        char buf[64];
        for (const TraceRow& r : rows) {
            out += std::to_string(r.iteration);
            for (double x : {r.r_upper, r.r_lower, r.lambda}) {
                std::snprintf(buf, sizeof buf, ",%.12g", x);
                out += buf;
            }
            for (double x : r.vertex) {
                std::snprintf(buf, sizeof buf, ",%.12g", x);
                out += buf;
            }
            out += "\n";
        }
        return out;
    }
};

// Runs the outer loop from a box [0, initial] guaranteed by the caller to
// contain Omega.  Stops when the bound gap closes below eps; hitting the
// iteration cap leaves `converged` false.
template <class O, class F>
    requires(DirectProjectionOracle<O> || MembershipOracle<O>)
MonotonicTrace<typename O::Witness> run_monotonic(const Vertex& initial, F&& objective, O& oracle,
                                                  const MonotonicOptions& opt = {}) {
    using W = typename O::Witness;
    detail::check_vertex(initial, "run_monotonic");
    for (double x : initial)
        if (x <= 0.0) throw error("run_monotonic: initial vertex must be strictly positive");
    if (!(opt.eps > 0.0)) throw error("run_monotonic: eps must be > 0");
    if (opt.max_iterations < 1) throw error("run_monotonic: max_iterations must be >= 1");
    const double beps = opt.bisect_eps > 0.0 ? opt.bisect_eps : opt.eps / 10.0;

    MonotonicTrace<W> tr;
    tr.incumbent = Vertex(initial.size(), 0.0);
    Polyblock p;
    p.vertices.push_back(initial);

    double prev_upper = std::numeric_limits<double>::infinity();
    int stagnation = 0;
    for (int k = 1; k <= opt.max_iterations; ++k) {
        tr.iterations = k;
        const Vertex z = best_vertex(p, objective);
        double r_vertex = objective(z);

        Projection<W> proj;
        if constexpr (DirectProjectionOracle<O>)
            proj = oracle.project(z, beps);
        else
            proj = bisect_project(oracle, z, beps);

        const double r_lower_before = tr.r_lower;
        if (proj.lambda <= 0.0) {
            // no feasible point worth keeping along this ray
            p.vertices.erase(std::find(p.vertices.begin(), p.vertices.end(), z));
        } else {
            Vertex o(z.size());
            for (std::size_t i = 0; i < z.size(); ++i) o[i] = proj.lambda * z[i];
            const double ro = objective(o);
            if (proj.has_witness && ro > tr.r_lower) {
                tr.r_lower = ro;
                tr.incumbent = o;
                tr.witness = std::move(proj.witness);
                tr.has_witness = true;
            }
            if (proj.lambda >= 1.0) {
                // the whole box [0, z] is feasible and fully resolved by z
                p.vertices.erase(std::find(p.vertices.begin(), p.vertices.end(), z));
            } else {
                p = cut_and_update(p, z, o);
                // a vertex with a zero coordinate has objective zero and can
                // never beat the incumbent
                std::erase_if(p.vertices, [](const Vertex& v) {
                    return *std::min_element(v.begin(), v.end()) <= 0.0;
                });
            }
        }

        // Rays through near-optimal vertices land spread along the boundary,
        // so the incumbent lags once progress turns tangential; let the
        // oracle polish it directly when it has been flat for a few rounds.
        if constexpr (IncumbentRefiner<O>) {
            if (stagnation >= 4 && k >= 6) {
                auto imp = oracle.refine_incumbent(z, tr.r_lower);
                if (imp) {
                    const double rv = objective(imp->first);
                    if (rv > tr.r_lower) {
                        tr.r_lower = rv;
                        tr.incumbent = std::move(imp->first);
                        tr.witness = std::move(imp->second);
                        tr.has_witness = true;
                    }
                }
            }
        }
        stagnation = tr.r_lower > r_lower_before ? 0 : stagnation + 1;

        if constexpr (CertifiedUpperBound<O>) {
            const double cb = oracle.certified_upper();
            if (cb < r_vertex) r_vertex = cb;
        }
        // keep the logged bound nonincreasing and never below the incumbent
        double ru = std::min(prev_upper, r_vertex);
        ru = std::max(ru, std::min(tr.r_lower, prev_upper));
        tr.r_upper = ru;
        prev_upper = ru;

        tr.rows.push_back({k, tr.r_upper, tr.r_lower, proj.lambda, z});
        if (tr.r_upper - tr.r_lower < opt.eps) {
            tr.converged = true;
            break;
        }
        if (p.vertices.empty()) {
            tr.r_upper = tr.r_lower;
            tr.converged = true;
            break;
        }
    }
    return tr;
}

}  // namespace wpmr
