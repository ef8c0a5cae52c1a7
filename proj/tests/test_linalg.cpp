#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qheat/linalg.hpp"

using namespace qheat;
using linalg::CMatrix;
using linalg::cxd;
using linalg::DMatrix;

TEST_CASE("eig_hermitian: Pauli-x spectrum") {
    CMatrix m(2);
    m(0, 1) = 1.0;
    m(1, 0) = 1.0;
    const auto es = linalg::eig_hermitian(m);
    CHECK(es.values[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(es.values[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("eig_hermitian: identity reconstructs for any orthonormal basis") {
    for (std::size_t n : {2u, 4u, 7u}) {
        const CMatrix m = CMatrix::identity(n);
        const auto es = linalg::eig_hermitian(m);
        for (double v : es.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(linalg::unitarity_defect(es.vectors) < 1e-10);
        // reconstruction only; the eigenbasis is arbitrary
        CMatrix rec(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                cxd s{};
                for (std::size_t k = 0; k < n; ++k)
                    s += es.vectors(i, k) * es.values[k] * std::conj(es.vectors(j, k));
                rec(i, j) = s;
            }
        CHECK(linalg::max_abs_diff(rec, m) < 1e-10);
    }
}

TEST_CASE("eig_hermitian: spin-1 tilted field Sz + Sx/2") {
    // eigenvalues of n.S are m |n|, |n| = sqrt(1 + 1/4)
    CMatrix m(3);
    m(0, 0) = 1.0;
    m(2, 2) = -1.0;
    const double r = 0.5 / std::sqrt(2.0);
    m(0, 1) = m(1, 0) = m(1, 2) = m(2, 1) = r;
    const auto es = linalg::eig_hermitian(m);
    const double lam = std::sqrt(5.0) / 2.0;
    CHECK(es.values[0] == doctest::Approx(-lam).epsilon(1e-10));
    CHECK(std::abs(es.values[1]) < 1e-10);
    CHECK(es.values[2] == doctest::Approx(lam).epsilon(1e-10));
    // characteristic polynomial check: det(H - lam I) = 0 for a 3x3 via
    // lam^3 - tr lam^2 + c2 lam - det; here lam^3 - (5/4) lam = 0
    for (double v : es.values)
        CHECK(std::abs(v * v * v - 1.25 * v) < 1e-10);
}

TEST_CASE("eig_hermitian: random matrices reconstruct and diagonalize") {
    std::mt19937_64 gen(42);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(gen() % 7); // 2..8
        const CMatrix m = testing::random_hermitian(gen, n);
        const auto es = linalg::eig_hermitian(m);
        for (std::size_t k = 0; k + 1 < n; ++k) CHECK(es.values[k] <= es.values[k + 1]);
        CHECK(linalg::unitarity_defect(es.vectors) < 1e-10);
        CMatrix rec(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                cxd s{};
                for (std::size_t k = 0; k < n; ++k)
                    s += es.vectors(i, k) * es.values[k] * std::conj(es.vectors(j, k));
                rec(i, j) = s;
            }
        CHECK(linalg::max_abs_diff(rec, m) < 1e-10);
        // trace identity
        double tr = 0.0, sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) tr += m(i, i).real();
        for (double v : es.values) sum += v;
        CHECK(tr == doctest::Approx(sum).epsilon(1e-10));
    }
}

TEST_CASE("eig_hermitian rejects non-Hermitian input") {
    CMatrix m(2);
    m(0, 1) = 1.0;
    m(1, 0) = 0.5;
    CHECK_THROWS_AS(linalg::eig_hermitian(m), linalg::NonHermitianInput);
}

TEST_CASE("propagator: tau = 0 gives the identity") {
    std::mt19937_64 gen(7);
    const auto es = linalg::eig_hermitian(testing::random_hermitian(gen, 4));
    CHECK(linalg::max_abs_diff(linalg::propagator(es, 0.0), CMatrix::identity(4)) < 1e-12);
}

TEST_CASE("propagator: diagonal H at tau = pi flips both phases") {
    CMatrix m(2);
    m(0, 0) = -1.0;
    m(1, 1) = 1.0;
    const auto es = linalg::eig_hermitian(m);
    const CMatrix u = linalg::propagator(es, std::acos(-1.0));
    CMatrix minus_i = CMatrix::identity(2);
    minus_i(0, 0) = -1.0;
    minus_i(1, 1) = -1.0;
    CHECK(linalg::max_abs_diff(u, minus_i) < 1e-12);
}

TEST_CASE("propagator agrees with the Taylor-series oracle") {
    CMatrix h(3);
    h(0, 0) = 1.0;
    h(2, 2) = -1.0;
    const double r = 0.5 / std::sqrt(2.0);
    h(0, 1) = h(1, 0) = h(1, 2) = h(2, 1) = r;
    const auto es = linalg::eig_hermitian(h);
    const CMatrix u = linalg::propagator(es, 1.0);
    CHECK(linalg::unitarity_defect(u) < 1e-10);
    CHECK(linalg::max_abs_diff(u, testing::taylor_propagator(h, 1.0)) < 1e-12);
}

TEST_CASE("propagator composes over time") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 10; ++trial) {
        const auto es = linalg::eig_hermitian(testing::random_hermitian(gen, 3));
        const CMatrix lhs = linalg::propagator(es, 0.7 + 0.1 * trial);
        const CMatrix rhs = linalg::propagator(es, 0.7) * linalg::propagator(es, 0.1 * trial);
        CHECK(linalg::max_abs_diff(lhs, rhs) < 1e-10);
    }
}

TEST_CASE("overlap_stochastic: identical bases give the identity") {
    std::mt19937_64 gen(3);
    const CMatrix u = testing::random_unitary(gen, 3);
    CHECK(linalg::max_abs_diff(linalg::overlap_stochastic(u, u), DMatrix::identity(3)) < 1e-12);
}

TEST_CASE("overlap_stochastic: mutually unbiased 2x2 bases") {
    CMatrix had(2);
    const double r = 1.0 / std::sqrt(2.0);
    had(0, 0) = r;
    had(1, 0) = r;
    had(0, 1) = r;
    had(1, 1) = -r;
    const DMatrix t = linalg::overlap_stochastic(CMatrix::identity(2), had);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) CHECK(t(i, j) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("overlap_stochastic is doubly stochastic for random unitaries") {
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 100; ++trial) {
        const CMatrix u = testing::random_unitary(gen, 3);
        const DMatrix t = linalg::overlap_stochastic(u, CMatrix::identity(3));
        CHECK(linalg::stochasticity_defect(t) < 1e-12);
    }
}

TEST_CASE("overlap_stochastic rejects non-unitary bases") {
    CMatrix bad = CMatrix::identity(2);
    bad(0, 0) = 2.0;
    CHECK_THROWS_AS(linalg::overlap_stochastic(bad, CMatrix::identity(2)),
                    linalg::NonUnitaryBasis);
}
