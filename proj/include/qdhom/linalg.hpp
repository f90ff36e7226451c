#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace qdhom {

using cplx = std::complex<double>;

// Dense complex matrix on a tiny Hilbert space (dim 4 for the model,
// dim 16 for vectorized superoperators). Row-major storage.
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    explicit ComplexMatrix(int dim) : dim_(dim), a_(static_cast<size_t>(dim) * dim) {
        if (dim <= 0) throw std::invalid_argument("ComplexMatrix: dim must be positive");
    }

    static ComplexMatrix zero(int dim) { return ComplexMatrix(dim); }

    static ComplexMatrix identity(int dim) {
        ComplexMatrix m(dim);
        for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }

    // |i><j| on a dim-dimensional space.
    static ComplexMatrix ket_bra(int dim, int i, int j) {
        ComplexMatrix m(dim);
        m(i, j) = 1.0;
        return m;
    }

    int dim() const { return dim_; }

    cplx& operator()(int i, int j) { return a_[static_cast<size_t>(i) * dim_ + j]; }
    const cplx& operator()(int i, int j) const { return a_[static_cast<size_t>(i) * dim_ + j]; }

    const std::vector<cplx>& data() const { return a_; }
    std::vector<cplx>& data() { return a_; }

    ComplexMatrix& operator+=(const ComplexMatrix& o) {
        check_same_dim(o);
        for (size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
        return *this;
    }
    ComplexMatrix& operator-=(const ComplexMatrix& o) {
        check_same_dim(o);
        for (size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
        return *this;
    }
    ComplexMatrix& operator*=(cplx s) {
        for (auto& v : a_) v *= s;
        return *this;
    }

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }
    friend ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }

    ComplexMatrix operator*(const ComplexMatrix& o) const {
        check_same_dim(o);
        const int d = dim_;
        ComplexMatrix r(d);
        for (int i = 0; i < d; ++i) {
            for (int k = 0; k < d; ++k) {
                const cplx aik = (*this)(i, k);
                if (aik == cplx(0.0)) continue;
                for (int j = 0; j < d; ++j) r(i, j) += aik * o(k, j);
            }
        }
        return r;
    }

    ComplexMatrix adjoint() const {
        ComplexMatrix r(dim_);
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) r(j, i) = std::conj((*this)(i, j));
        return r;
    }

    ComplexMatrix transpose() const {
        ComplexMatrix r(dim_);
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) r(j, i) = (*this)(i, j);
        return r;
    }

    cplx trace() const {
        cplx t = 0.0;
        for (int i = 0; i < dim_; ++i) t += (*this)(i, i);
        return t;
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& v : a_) m = std::max(m, std::abs(v));
        return m;
    }

    double norm_inf() const {  // max row sum
        double m = 0.0;
        for (int i = 0; i < dim_; ++i) {
            double s = 0.0;
            for (int j = 0; j < dim_; ++j) s += std::abs((*this)(i, j));
            m = std::max(m, s);
        }
        return m;
    }

    bool all_finite() const {
        for (const auto& v : a_)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }

private:
    void check_same_dim(const ComplexMatrix& o) const {
        if (dim_ != o.dim_) throw std::invalid_argument("ComplexMatrix: dimension mismatch");
    }

    int dim_ = 0;
    std::vector<cplx> a_;
};

inline double hermiticity_defect(const ComplexMatrix& m) {
    double d = 0.0;
    for (int i = 0; i < m.dim(); ++i)
        for (int j = 0; j < m.dim(); ++j)
            d = std::max(d, std::abs(m(i, j) - std::conj(m(j, i))));
    return d;
}

// Column-major vectorization: vec(rho)[j*d + i] = rho(i, j), so that
// vec(A rho B) = (B^T (x) A) vec(rho).
inline std::vector<cplx> vectorize(const ComplexMatrix& rho) {
    const int d = rho.dim();
    std::vector<cplx> v(static_cast<size_t>(d) * d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) v[static_cast<size_t>(j) * d + i] = rho(i, j);
    return v;
}

inline ComplexMatrix unvectorize(const std::vector<cplx>& v, int d) {
    if (v.size() != static_cast<size_t>(d) * d)
        throw std::invalid_argument("unvectorize: size mismatch");
    ComplexMatrix rho(d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i) rho(i, j) = v[static_cast<size_t>(j) * d + i];
    return rho;
}

// Generator (or propagator) acting on column-vectorized density matrices.
class Superoperator {
public:
    Superoperator() = default;
    explicit Superoperator(int hilbert_dim)
        : hdim_(hilbert_dim), m_(hilbert_dim * hilbert_dim) {}
    Superoperator(int hilbert_dim, ComplexMatrix m) : hdim_(hilbert_dim), m_(std::move(m)) {
        if (m_.dim() != hilbert_dim * hilbert_dim)
            throw std::invalid_argument("Superoperator: matrix must be d^2 x d^2");
    }

    static Superoperator zero(int d) { return Superoperator(d); }
    static Superoperator identity(int d) {
        return Superoperator(d, ComplexMatrix::identity(d * d));
    }

    // vec(A rho B) = (B^T (x) A) vec(rho)
    static Superoperator sandwich(const ComplexMatrix& a, const ComplexMatrix& b) {
        const int d = a.dim();
        if (b.dim() != d) throw std::invalid_argument("sandwich: dimension mismatch");
        Superoperator s(d);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i)
                for (int l = 0; l < d; ++l)
                    for (int k = 0; k < d; ++k)
                        s.m_(j * d + i, l * d + k) = a(i, k) * b(l, j);
        return s;
    }

    static Superoperator left_mult(const ComplexMatrix& a) {
        return sandwich(a, ComplexMatrix::identity(a.dim()));
    }
    static Superoperator right_mult(const ComplexMatrix& b) {
        return sandwich(ComplexMatrix::identity(b.dim()), b);
    }

    int hilbert_dim() const { return hdim_; }
    const ComplexMatrix& matrix() const { return m_; }
    ComplexMatrix& matrix() { return m_; }

    Superoperator& operator+=(const Superoperator& o) {
        check(o);
        m_ += o.m_;
        return *this;
    }
    Superoperator& operator-=(const Superoperator& o) {
        check(o);
        m_ -= o.m_;
        return *this;
    }
    Superoperator& operator*=(cplx s) {
        m_ *= s;
        return *this;
    }
    friend Superoperator operator+(Superoperator a, const Superoperator& b) { return a += b; }
    friend Superoperator operator-(Superoperator a, const Superoperator& b) { return a -= b; }
    friend Superoperator operator*(Superoperator a, cplx s) { return a *= s; }
    friend Superoperator operator*(cplx s, Superoperator a) { return a *= s; }

    // Composition: (this ∘ o)
    Superoperator compose(const Superoperator& o) const {
        check(o);
        return Superoperator(hdim_, m_ * o.m_);
    }

    void apply_vec(const cplx* in, cplx* out) const {
        const int n = hdim_ * hdim_;
        const auto& a = m_.data();
        for (int i = 0; i < n; ++i) {
            cplx s = 0.0;
            const cplx* row = a.data() + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) s += row[j] * in[j];
            out[i] = s;
        }
    }

    ComplexMatrix apply(const ComplexMatrix& rho) const {
        if (rho.dim() != hdim_)
            throw std::invalid_argument("Superoperator::apply: dimension mismatch");
        auto v = vectorize(rho);
        std::vector<cplx> w(v.size());
        apply_vec(v.data(), w.data());
        return unvectorize(w, hdim_);
    }

private:
    void check(const Superoperator& o) const {
        if (hdim_ != o.hdim_) throw std::invalid_argument("Superoperator: dimension mismatch");
    }

    int hdim_ = 0;
    ComplexMatrix m_;
};

// Scaling-and-squaring matrix exponential (Taylor core). exp(0) = I.
inline ComplexMatrix matrix_exponential(const ComplexMatrix& m) {
    if (!m.all_finite()) throw std::invalid_argument("matrix_exponential: non-finite entries");
    const int d = m.dim();
    const double nrm = m.norm_inf();
    int s = 0;
    if (nrm > 0.5) s = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
    const double scale = std::ldexp(1.0, -s);

    ComplexMatrix b = m * cplx(scale, 0.0);
    ComplexMatrix result = ComplexMatrix::identity(d);
    ComplexMatrix term = ComplexMatrix::identity(d);
    for (int k = 1; k <= 40; ++k) {
        term = term * b;
        term *= cplx(1.0 / k, 0.0);
        result += term;
        if (term.max_abs() < 1e-18 * std::max(1.0, result.max_abs())) break;
    }
    for (int k = 0; k < s; ++k) result = result * result;
    return result;
}

inline Superoperator matrix_exponential(const Superoperator& l) {
    return Superoperator(l.hilbert_dim(), matrix_exponential(l.matrix()));
}

struct EigenResult {
    std::vector<double> values;   // ascending
    ComplexMatrix vectors;        // columns are eigenvectors
};

// Cyclic Jacobi diagonalization for small Hermitian matrices.
inline EigenResult eigendecompose_hermitian(const ComplexMatrix& m,
                                            double herm_tol = 1e-9) {
    const int d = m.dim();
    const double scale = std::max(1.0, m.max_abs());
    if (hermiticity_defect(m) > herm_tol * scale)
        throw std::invalid_argument("eigendecompose_hermitian: input is not Hermitian");

    ComplexMatrix a = m;
    ComplexMatrix v = ComplexMatrix::identity(d);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) off = std::max(off, std::abs(a(p, q)));
        if (off < 1e-15 * scale) break;

        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                const cplx apq = a(p, q);
                const double r = std::abs(apq);
                if (r < 1e-18 * scale) continue;
                const double phi = std::arg(apq);
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double theta = 0.5 * std::atan2(2.0 * r, app - aqq);
                const double c = std::cos(theta);
                const double sn = std::sin(theta);
                const cplx eip = std::polar(1.0, phi);
                const cplx eim = std::conj(eip);

                // J = [[c, -s e^{i phi}], [s e^{-i phi}, c]] acting on (p, q)
                for (int i = 0; i < d; ++i) {  // A <- A J, V <- V J
                    const cplx aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip + sn * eim * aiq;
                    a(i, q) = -sn * eip * aip + c * aiq;
                    const cplx vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip + sn * eim * viq;
                    v(i, q) = -sn * eip * vip + c * viq;
                }
                for (int j = 0; j < d; ++j) {  // A <- J^dagger A
                    const cplx apj = a(p, j), aqj = a(q, j);
                    a(p, j) = c * apj + sn * eip * aqj;
                    a(q, j) = -sn * eim * apj + c * aqj;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
            }
        }
    }

    std::vector<int> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return a(i, i).real() < a(j, j).real(); });

    EigenResult res;
    res.values.resize(d);
    res.vectors = ComplexMatrix(d);
    for (int k = 0; k < d; ++k) {
        res.values[k] = a(order[k], order[k]).real();
        for (int i = 0; i < d; ++i) res.vectors(i, k) = v(i, order[k]);
    }
    return res;
}

inline double min_eigenvalue_hermitian(const ComplexMatrix& m, double herm_tol = 1e-6) {
    return eigendecompose_hermitian(m, herm_tol).values.front();
}

// Density-matrix sanity checks (tolerances per role).
struct DensityCheck {
    double trace_defect;
    double hermiticity;
    double min_eigenvalue;
};

inline DensityCheck check_density_matrix(const ComplexMatrix& rho) {
    DensityCheck c;
    c.trace_defect = std::abs(rho.trace() - cplx(1.0));
    c.hermiticity = hermiticity_defect(rho);
    // Symmetrize before the eigensolve so tiny integration asymmetry
    // does not trip the Hermiticity gate.
    ComplexMatrix h = rho;
    h += rho.adjoint();
    h *= cplx(0.5, 0.0);
    c.min_eigenvalue = min_eigenvalue_hermitian(h, 1e-3);
    return c;
}

}  // namespace qdhom
