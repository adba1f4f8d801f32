#pragma once

// Dense linear algebra sized for small cone-program blocks (dims stay well
// under ~100 after real embedding). Real and complex matrices are stored
// row-major in flat vectors; eigendecompositions use cyclic Jacobi sweeps,
// which at these sizes beat any blocked scheme on accuracy and are trivially
// deterministic.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "wpmr/common.hpp"

namespace wpmr {

class RMat {
public:
    RMat() = default;
    RMat(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw error("RMat: negative dimension");
    }

    static RMat identity(int n) {
        RMat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return a_.empty(); }

    double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

    RMat transposed() const {
        RMat t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    RMat& operator+=(const RMat& o) {
        check_same_shape(o);
        for (size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
        return *this;
    }
    RMat& operator-=(const RMat& o) {
        check_same_shape(o);
        for (size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
        return *this;
    }
    RMat& operator*=(double s) {
        for (double& v : a_) v *= s;
        return *this;
    }
    friend RMat operator+(RMat a, const RMat& b) { return a += b; }
    friend RMat operator-(RMat a, const RMat& b) { return a -= b; }
    friend RMat operator*(RMat a, double s) { return a *= s; }
    friend RMat operator*(double s, RMat a) { return a *= s; }

    friend RMat operator*(const RMat& a, const RMat& b) {
        if (a.cols_ != b.rows_) throw error("RMat multiply: shape mismatch");
        RMat c(a.rows_, b.cols_);
        for (int i = 0; i < a.rows_; ++i)
            for (int k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                for (int j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    double trace() const {
        double t = 0.0;
        for (int i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
        return t;
    }

    double frobenius() const {
        double s = 0.0;
        for (double v : a_) s += v * v;
        return std::sqrt(s);
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : a_) m = std::max(m, std::abs(v));
        return m;
    }

    void symmetrize() {
        for (int i = 0; i < rows_; ++i)
            for (int j = i + 1; j < cols_; ++j) {
                const double v = 0.5 * ((*this)(i, j) + (*this)(j, i));
                (*this)(i, j) = v;
                (*this)(j, i) = v;
            }
    }

private:
    void check_same_shape(const RMat& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) throw error("RMat: shape mismatch");
    }
    int rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

inline RVec operator*(const RMat& a, const RVec& x) {
    if (a.cols() != static_cast<int>(x.size())) throw error("RMat*RVec: shape mismatch");
    RVec y(a.rows(), 0.0);
    for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

inline double dot(const RVec& a, const RVec& b) {
    if (a.size() != b.size()) throw error("dot: length mismatch");
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(const RVec& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const RVec& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

// Square complex matrix; Hermitian-structured data is kept exactly Hermitian
// by the routines that produce it.
class CMat {
public:
    CMat() = default;
    explicit CMat(int n, cxd fill = cxd(0.0, 0.0))
        : n_(n), a_(static_cast<size_t>(n) * n, fill) {
        if (n < 0) throw error("CMat: negative dimension");
    }

    static CMat identity(int n) {
        CMat m(n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    // Rank-one v v^H.
    static CMat outer(const CVec& v) {
        CMat m(static_cast<int>(v.size()));
        for (int i = 0; i < m.n_; ++i)
            for (int j = 0; j < m.n_; ++j) m(i, j) = v[i] * std::conj(v[j]);
        return m;
    }

    int dim() const { return n_; }

    cxd& operator()(int i, int j) { return a_[static_cast<size_t>(i) * n_ + j]; }
    cxd operator()(int i, int j) const { return a_[static_cast<size_t>(i) * n_ + j]; }

    CMat adjoint() const {
        CMat t(n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) t(j, i) = std::conj((*this)(i, j));
        return t;
    }

    CMat& operator+=(const CMat& o) {
        if (n_ != o.n_) throw error("CMat: shape mismatch");
        for (size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
        return *this;
    }
    CMat& operator*=(double s) {
        for (cxd& v : a_) v *= s;
        return *this;
    }
    friend CMat operator+(CMat a, const CMat& b) { return a += b; }
    friend CMat operator*(CMat a, double s) { return a *= s; }
    friend CMat operator*(double s, CMat a) { return a *= s; }

    friend CMat operator*(const CMat& a, const CMat& b) {
        if (a.n_ != b.n_) throw error("CMat multiply: shape mismatch");
        CMat c(a.n_);
        for (int i = 0; i < a.n_; ++i)
            for (int k = 0; k < a.n_; ++k) {
                const cxd aik = a(i, k);
                if (aik == cxd(0.0, 0.0)) continue;
                for (int j = 0; j < a.n_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    cxd trace() const {
        cxd t = 0.0;
        for (int i = 0; i < n_; ++i) t += (*this)(i, i);
        return t;
    }

    double frobenius() const {
        double s = 0.0;
        for (const cxd& v : a_) s += std::norm(v);
        return std::sqrt(s);
    }

    double hermitian_deviation() const {
        double d = 0.0;
        for (int i = 0; i < n_; ++i)
            for (int j = i; j < n_; ++j)
                d = std::max(d, std::abs((*this)(i, j) - std::conj((*this)(j, i))));
        return d;
    }

private:
    int n_ = 0;
    CVec a_;
};

// x^H M x for Hermitian M (returns the real part; imaginary part is zero up
// to rounding for Hermitian input).
inline double quad_form(const CMat& m, const CVec& x) {
    if (m.dim() != static_cast<int>(x.size())) throw error("quad_form: shape mismatch");
    cxd s = 0.0;
    for (int i = 0; i < m.dim(); ++i)
        for (int j = 0; j < m.dim(); ++j) s += std::conj(x[i]) * m(i, j) * x[j];
    return s.real();
}

inline cxd cdot(const CVec& a, const CVec& b) {  // a^H b
    if (a.size() != b.size()) throw error("cdot: length mismatch");
    cxd s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

inline double cnorm2(const CVec& a) { return std::sqrt(cdot(a, a).real()); }

// [[Re M, -Im M], [Im M, Re M]]: the standard real embedding. For Hermitian M
// the result is symmetric, every eigenvalue of M appears twice, and the trace
// doubles.
inline RMat real_embed(const CMat& m) {
    const int n = m.dim();
    RMat r(2 * n, 2 * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const cxd v = m(i, j);
            r(i, j) = v.real();
            r(i + n, j + n) = v.real();
            r(i, j + n) = -v.imag();
            r(i + n, j) = v.imag();
        }
    return r;
}

inline RVec real_embed(const CVec& v) {
    RVec r(2 * v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        r[i] = v[i].real();
        r[i + v.size()] = v[i].imag();
    }
    return r;
}

// Recovers the Hermitian k x k matrix represented by a 2k x 2k real block:
// the inverse of real_embed on embedded matrices, and for an arbitrary
// symmetric PSD block the projection onto embeddings, which preserves
// positive semidefiniteness and every quadratic form f^H X f measured
// through embed(f f^H)/2.
inline CMat unembed_hermitian(const RMat& w, int k) {
    if (w.rows() != 2 * k || w.cols() != 2 * k)
        throw error("unembed_hermitian: block must be 2k x 2k");
    CMat out(k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            const double re = 0.5 * (w(i, j) + w(k + i, k + j));
            const double im = 0.5 * (w(k + i, j) - w(i, k + j));
            out(i, j) = cxd(re, im);
        }
    CMat h = out.adjoint();
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) out(i, j) = 0.5 * (out(i, j) + h(i, j));
    return out;
}

struct EigResult {
    RVec values;   // ascending
    CMat vectors;  // unitary, columns match values
};

struct RealEigResult {
    RVec values;  // ascending
    RMat vectors; // orthogonal, columns match values
};

namespace detail {

// Smaller-magnitude root of t^2 - 2*delta*t - 1 = 0; the classic stable
// Jacobi angle choice.
inline double jacobi_tangent(double delta) {
    const double sign = (delta >= 0.0) ? 1.0 : -1.0;
    return -sign / (std::abs(delta) + std::hypot(delta, 1.0));
}

}  // namespace detail

// Cyclic Jacobi for real symmetric matrices.
inline RealEigResult eig_symmetric(RMat a) {
    const int n = a.rows();
    if (n != a.cols()) throw error("eig_symmetric: matrix not square");
    RMat v = RMat::identity(n);
    const double scale = std::max(a.frobenius(), 1e-300);
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(2.0 * off) <= 1e-15 * scale) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-18 * scale) continue;
                const double app = a(p, p), aqq = a(q, q);
                const double t = detail::jacobi_tangent((aqq - app) / (2.0 * apq));
                const double c = 1.0 / std::sqrt(1.0 + t * t), s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp + s * akq;
                    a(k, q) = -s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk + s * aqk;
                    a(q, k) = -s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp + s * vkq;
                    v(k, q) = -s * vkp + c * vkq;
                }
            }
        }
    }
    RealEigResult res;
    res.values.resize(n);
    for (int i = 0; i < n; ++i) res.values[i] = a(i, i);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return res.values[i] < res.values[j]; });
    RVec sorted(n);
    RMat vs(n, n);
    for (int j = 0; j < n; ++j) {
        sorted[j] = res.values[order[j]];
        for (int i = 0; i < n; ++i) vs(i, j) = v(i, order[j]);
    }
    res.values = std::move(sorted);
    res.vectors = std::move(vs);
    return res;
}

// Cyclic Jacobi specialized to Hermitian matrices: each (p,q) pivot is phase-
// rotated to a real 2x2 problem and annihilated with a real rotation.
inline EigResult eig_hermitian(const CMat& h) {
    const int n = h.dim();
    const double scale = std::max(h.frobenius(), 1e-300);
    if (h.hermitian_deviation() > 1e-12 * std::max(1.0, scale))
        throw error("eig_hermitian: input is not Hermitian");
    CMat a = h;
    CMat v = CMat::identity(n);
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += std::norm(a(p, q));
        if (std::sqrt(2.0 * off) <= 1e-15 * scale) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double r = std::abs(a(p, q));
                if (r <= 1e-18 * scale) continue;
                // Column p carries the phase so the pivot becomes real.
                const cxd phase = a(p, q) / r;  // e^{i phi} with a(p,q)=r e^{i phi}
                const double app = a(p, p).real(), aqq = a(q, q).real();
                const double t = detail::jacobi_tangent((aqq - app) / (2.0 * r));
                const double c = 1.0 / std::sqrt(1.0 + t * t), s = t * c;
                const cxd up = c * phase, uq = -s * phase;  // column updates
                for (int k = 0; k < n; ++k) {
                    const cxd akp = a(k, p), akq = a(k, q);
                    a(k, p) = akp * up + akq * s;
                    a(k, q) = akp * uq + akq * c;
                }
                for (int k = 0; k < n; ++k) {
                    const cxd apk = a(p, k), aqk = a(q, k);
                    a(p, k) = std::conj(up) * apk + s * aqk;
                    a(q, k) = std::conj(uq) * apk + c * aqk;
                }
                a(p, q) = std::conj(a(q, p));  // keep exact Hermitian symmetry
                for (int k = 0; k < n; ++k) {
                    const cxd vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = vkp * up + vkq * s;
                    v(k, q) = vkp * uq + vkq * c;
                }
            }
        }
    }
    EigResult res;
    res.values.resize(n);
    for (int i = 0; i < n; ++i) res.values[i] = a(i, i).real();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return res.values[i] < res.values[j]; });
    RVec sorted(n);
    CMat vs(n);
    for (int j = 0; j < n; ++j) {
        sorted[j] = res.values[order[j]];
        for (int i = 0; i < n; ++i) vs(i, j) = v(i, order[j]);
    }
    res.values = std::move(sorted);
    res.vectors = std::move(vs);
    return res;
}

// PSD test with tolerance relative to the largest eigenvalue magnitude.
inline bool is_psd(const CMat& h, double tol = 1e-9) {
    const EigResult e = eig_hermitian(h);
    if (e.values.empty()) return true;
    double maxabs = 0.0;
    for (double ev : e.values) maxabs = std::max(maxabs, std::abs(ev));
    return e.values.front() >= -tol * std::max(maxabs, 1e-300);
}

// Hermitian square root of a PSD matrix; small negative eigenvalues are
// clamped to zero.
inline CMat psd_sqrt(const CMat& h) {
    const EigResult e = eig_hermitian(h);
    const int n = h.dim();
    CMat out(n);
    for (int k = 0; k < n; ++k) {
        const double r = std::sqrt(std::max(e.values[k], 0.0));
        if (r == 0.0) continue;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                out(i, j) += r * e.vectors(i, k) * std::conj(e.vectors(j, k));
    }
    return out;
}

// Lower Cholesky factor of a symmetric positive definite matrix; returns
// false (leaving l unspecified) when a nonpositive pivot appears.
inline bool cholesky(const RMat& a, RMat& l) {
    const int n = a.rows();
    if (n != a.cols()) throw error("cholesky: matrix not square");
    l = RMat(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0 || !std::isfinite(s)) return false;
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return true;
}

// Cholesky for nearly singular SPD matrices: pivots falling below
// rel_floor * diag are clamped instead of failing, confining the error to
// the near-null directions (the caller is expected to iteratively refine).
inline bool cholesky_clamped(const RMat& a, RMat& l, double rel_floor = 1e-14) {
    const int n = a.rows();
    if (n != a.cols()) throw error("cholesky_clamped: matrix not square");
    double dmax = 0.0;
    for (int i = 0; i < n; ++i) dmax = std::max(dmax, std::abs(a(i, i)));
    if (!(dmax > 0.0) || !std::isfinite(dmax)) return false;
    l = RMat(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                const double floor_i = rel_floor * std::max(a(i, i), rel_floor * dmax);
                if (!std::isfinite(s)) return false;
                l(i, i) = std::sqrt(std::max(s, floor_i));
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return true;
}

inline void solve_lower(const RMat& l, RVec& x) {  // l x = b in place
    const int n = l.rows();
    for (int i = 0; i < n; ++i) {
        double s = x[i];
        for (int k = 0; k < i; ++k) s -= l(i, k) * x[k];
        x[i] = s / l(i, i);
    }
}

inline void solve_lower_t(const RMat& l, RVec& x) {  // l^T x = b in place
    const int n = l.rows();
    for (int i = n - 1; i >= 0; --i) {
        double s = x[i];
        for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
        x[i] = s / l(i, i);
    }
}

inline void cholesky_solve(const RMat& l, RVec& x) {
    solve_lower(l, x);
    solve_lower_t(l, x);
}

// In-place triangular solves against matrices: L * X = B and L^T * X = B.
inline void solve_lower_mat(const RMat& l, RMat& b) {
    for (int j = 0; j < b.cols(); ++j) {
        for (int i = 0; i < l.rows(); ++i) {
            double s = b(i, j);
            for (int k = 0; k < i; ++k) s -= l(i, k) * b(k, j);
            b(i, j) = s / l(i, i);
        }
    }
}

inline void solve_lower_t_mat(const RMat& l, RMat& b) {
    for (int j = 0; j < b.cols(); ++j) {
        for (int i = l.rows() - 1; i >= 0; --i) {
            double s = b(i, j);
            for (int k = i + 1; k < l.rows(); ++k) s -= l(k, i) * b(k, j);
            b(i, j) = s / l(i, i);
        }
    }
}

struct SvdResult {
    RMat u;     // n x n orthogonal
    RVec sigma; // descending, nonnegative
    RMat v;     // n x n orthogonal, a = u * diag(sigma) * v^T
};

// One-sided Jacobi SVD for square matrices. Chosen over an eigendecomposition
// of a^T a because it keeps full relative accuracy in the small singular
// values, which the interior-point scaling needs near convergence.
inline SvdResult jacobi_svd(RMat a) {
    const int n = a.rows();
    if (n != a.cols()) throw error("jacobi_svd: matrix not square");
    RMat v = RMat::identity(n);
    const double scale = std::max(a.frobenius(), 1e-300);
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double spp = 0.0, sqq = 0.0, spq = 0.0;
                for (int k = 0; k < n; ++k) {
                    spp += a(k, p) * a(k, p);
                    sqq += a(k, q) * a(k, q);
                    spq += a(k, p) * a(k, q);
                }
                if (std::abs(spq) <= 1e-16 * std::sqrt(spp * sqq) ||
                    std::abs(spq) <= 1e-300)
                    continue;
                rotated = true;
                const double t = detail::jacobi_tangent((sqq - spp) / (2.0 * spq));
                const double c = 1.0 / std::sqrt(1.0 + t * t), s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp + s * akq;
                    a(k, q) = -s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp + s * vkq;
                    v(k, q) = -s * vkp + c * vkq;
                }
            }
        }
        if (!rotated) break;
    }
    SvdResult res;
    res.sigma.resize(n);
    res.u = RMat(n, n);
    std::vector<int> order(n);
    RVec norms(n);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += a(k, j) * a(k, j);
        norms[j] = std::sqrt(s);
    }
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) { return norms[i] > norms[j]; });
    RMat vs(n, n);
    for (int j = 0; j < n; ++j) {
        const int src = order[j];
        res.sigma[j] = norms[src];
        const double inv = (norms[src] > 1e-300) ? 1.0 / norms[src] : 0.0;
        for (int k = 0; k < n; ++k) {
            res.u(k, j) = a(k, src) * inv;
            vs(k, j) = v(k, src);
        }
    }
    res.v = std::move(vs);
    (void)scale;
    return res;
}

}  // namespace wpmr
