#include "qheat/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qheat::linalg {

CMatrix operator*(const CMatrix& a, const CMatrix& b) {
    const std::size_t n = a.dim();
    CMatrix c(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            const cxd aik = a(i, k);
            if (aik == cxd{}) continue;
            for (std::size_t j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

DMatrix operator*(const DMatrix& a, const DMatrix& b) {
    const std::size_t n = a.dim();
    DMatrix c(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

CMatrix adjoint(const CMatrix& m) {
    const std::size_t n = m.dim();
    CMatrix r(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) r(i, j) = std::conj(m(j, i));
    return r;
}

double max_abs_diff(const CMatrix& a, const CMatrix& b) {
    const std::size_t n = a.dim();
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) d = std::max(d, std::abs(a(i, j) - b(i, j)));
    return d;
}

double max_abs_diff(const DMatrix& a, const DMatrix& b) {
    const std::size_t n = a.dim();
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) d = std::max(d, std::abs(a(i, j) - b(i, j)));
    return d;
}

double hermiticity_defect(const CMatrix& m) {
    const std::size_t n = m.dim();
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            d = std::max(d, std::abs(m(i, j) - std::conj(m(j, i))));
    return d;
}

double unitarity_defect(const CMatrix& m) {
    return max_abs_diff(adjoint(m) * m, CMatrix::identity(m.dim()));
}

bool is_unitary(const CMatrix& m, double tol) {
    return unitarity_defect(m) <= tol;
}

double stochasticity_defect(const DMatrix& m) {
    const std::size_t n = m.dim();
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0, col = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row += m(i, j);
            col += m(j, i);
        }
        d = std::max({d, std::abs(row - 1.0), std::abs(col - 1.0)});
    }
    return d;
}

namespace {

double offdiag_fro(const CMatrix& a) {
    const std::size_t n = a.dim();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) s += std::norm(a(i, j));
    return std::sqrt(s);
}

} // namespace

EigenSystem eig_hermitian(const CMatrix& m, double herm_tol) {
    const std::size_t n = m.dim();
    if (n < 2) throw std::invalid_argument("eig_hermitian: dimension must be >= 2");
    const double defect = hermiticity_defect(m);
    if (defect > herm_tol)
        throw NonHermitianInput("eig_hermitian: max asymmetry " + std::to_string(defect));

    // Work on the symmetrized copy.
    CMatrix a(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            a(i, j) = 0.5 * (m(i, j) + std::conj(m(j, i)));
    CMatrix v = CMatrix::identity(n);

    constexpr double kOffTol = 1e-14;
    constexpr int kMaxSweeps = 100;

    for (int sweep = 0; sweep < kMaxSweeps && offdiag_fro(a) >= kOffTol; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double g = std::abs(a(p, q));
                if (g == 0.0) continue;
                const cxd phase = a(p, q) / g; // e^{i phi}

                // 2x2 rotation angle: tan(2 theta) = 2g / (a_qq - a_pp)
                const double theta = (a(q, q).real() - a(p, p).real()) / (2.0 * g);
                double t;
                if (std::abs(theta) > 1e150) {
                    t = 0.5 / theta;
                } else {
                    t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    if (theta < 0.0) t = -t;
                }
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                // J = I except J[p][p]=c, J[p][q]=s*phase, J[q][p]=-s*conj(phase), J[q][q]=c
                // Row update: a <- J^dag a
                for (std::size_t j = 0; j < n; ++j) {
                    const cxd apj = a(p, j), aqj = a(q, j);
                    a(p, j) = c * apj - s * phase * aqj;
                    a(q, j) = s * std::conj(phase) * apj + c * aqj;
                }
                // Column update: a <- a J, and accumulate v <- v J
                for (std::size_t i = 0; i < n; ++i) {
                    const cxd aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * std::conj(phase) * aiq;
                    a(i, q) = s * phase * aip + c * aiq;
                    const cxd vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * std::conj(phase) * viq;
                    v(i, q) = s * phase * vip + c * viq;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
            }
        }
    }

    // Sort ascending, permuting eigenvector columns along.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return a(i, i).real() < a(j, j).real(); });

    EigenSystem es;
    es.values.resize(n);
    es.vectors = CMatrix(n);
    for (std::size_t k = 0; k < n; ++k) {
        es.values[k] = a(order[k], order[k]).real();
        for (std::size_t i = 0; i < n; ++i) es.vectors(i, k) = v(i, order[k]);
    }
    return es;
}

CMatrix propagator(const EigenSystem& es, double tau) {
    const std::size_t n = es.values.size();
    CMatrix u(n);
    std::vector<cxd> ph(n);
    for (std::size_t k = 0; k < n; ++k)
        ph[k] = std::exp(cxd(0.0, -es.values[k] * tau));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            cxd s{};
            for (std::size_t k = 0; k < n; ++k)
                s += es.vectors(i, k) * ph[k] * std::conj(es.vectors(j, k));
            u(i, j) = s;
        }
    return u;
}

DMatrix overlap_stochastic(const CMatrix& basis_a, const CMatrix& basis_b) {
    if (!is_unitary(basis_a) || !is_unitary(basis_b))
        throw NonUnitaryBasis("overlap_stochastic: input basis is not unitary");
    const std::size_t n = basis_a.dim();
    DMatrix t(n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) {
            cxd s{};
            for (std::size_t i = 0; i < n; ++i)
                s += std::conj(basis_a(i, j)) * basis_b(i, k);
            t(j, k) = std::norm(s);
        }
    return t;
}

} // namespace qheat::linalg
