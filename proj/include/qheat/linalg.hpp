// Dependency-light complex dense linear algebra for small dimensions (N <= 8):
// Hermitian eigendecomposition (cyclic Jacobi), spectral propagators and
// unistochastic overlap matrices.

#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qheat::linalg {

using cxd = std::complex<double>;

struct NonHermitianInput : std::runtime_error {
    explicit NonHermitianInput(const std::string& what) : std::runtime_error(what) {}
};

struct NonUnitaryBasis : std::runtime_error {
    explicit NonUnitaryBasis(const std::string& what) : std::runtime_error(what) {}
};

// Dense complex square matrix, row-major.
class CMatrix {
public:
    CMatrix() = default;
    explicit CMatrix(std::size_t n) : n_(n), a_(n * n) {}

    static CMatrix identity(std::size_t n) {
        CMatrix m(n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t dim() const noexcept { return n_; }

    cxd& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
    const cxd& operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

private:
    std::size_t n_ = 0;
    std::vector<cxd> a_;
};

// Dense real square matrix, row-major.
class DMatrix {
public:
    DMatrix() = default;
    explicit DMatrix(std::size_t n) : n_(n), a_(n * n) {}

    static DMatrix identity(std::size_t n) {
        DMatrix m(n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t dim() const noexcept { return n_; }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
    const double& operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

private:
    std::size_t n_ = 0;
    std::vector<double> a_;
};

CMatrix operator*(const CMatrix& a, const CMatrix& b);
DMatrix operator*(const DMatrix& a, const DMatrix& b);
CMatrix adjoint(const CMatrix& m);

double max_abs_diff(const CMatrix& a, const CMatrix& b);
double max_abs_diff(const DMatrix& a, const DMatrix& b);

// max_{jk} |m[j][k] - conj(m[k][j])|
double hermiticity_defect(const CMatrix& m);
// max-entry deviation of m^dag * m from the identity
double unitarity_defect(const CMatrix& m);
bool is_unitary(const CMatrix& m, double tol = 1e-10);

// Largest deviation of any row or column sum from 1.
double stochasticity_defect(const DMatrix& m);

struct EigenSystem {
    std::vector<double> values; // ascending
    CMatrix vectors;            // column k = eigenvector of values[k]
};

// Cyclic Jacobi rotations; off-diagonal Frobenius norm < 1e-14, max 100 sweeps.
// Throws NonHermitianInput when the symmetry defect exceeds herm_tol.
EigenSystem eig_hermitian(const CMatrix& m, double herm_tol = 1e-12);

// U(tau) = V diag(e^{-i E_k tau}) V^dag
CMatrix propagator(const EigenSystem& es, double tau);

// T[j][k] = |<a_j|b_k>|^2 for unitary column bases; the result is unistochastic.
DMatrix overlap_stochastic(const CMatrix& basis_a, const CMatrix& basis_b);

} // namespace qheat::linalg
