#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qheat/protocol.hpp"

using namespace qheat;
using linalg::CMatrix;
using linalg::DMatrix;
using model::EnergySpectrum;
using model::InitialState;
using model::Observable;
using protocol::MeasurementChain;
using protocol::WaitingTimeSpec;

namespace {

struct Spin1System {
    CMatrix h_lab{3};
    CMatrix o_lab{3};
    linalg::EigenSystem h;
    Observable o;
    EnergySpectrum e{std::vector<double>{-1.0, 0.0, 1.0}};
};

// H = Sz + Sx/2 measured with O = Sz: nothing commutes, all gaps distinct.
Spin1System tilted_spin1() {
    Spin1System s;
    const auto [sz, sx] = model::spin1_operators();
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) s.h_lab(i, j) = sz(i, j) + 0.5 * sx(i, j);
    s.o_lab = sz;
    s.h = linalg::eig_hermitian(s.h_lab);
    s.o = model::observable_from_matrix(s.o_lab, s.h);
    s.e = EnergySpectrum::from_eigensystem(s.h);
    return s;
}

double max_abs(const DMatrix& a, const DMatrix& b) { return linalg::max_abs_diff(a, b); }

} // namespace

TEST_CASE("WaitingTimeSpec: validation and sampling") {
    CHECK_THROWS_AS(WaitingTimeSpec::fixed(-1.0), protocol::InvalidSpec);
    CHECK_THROWS_AS(WaitingTimeSpec::uniform_range(2.0, 1.0), protocol::InvalidSpec);
    CHECK_THROWS_AS(WaitingTimeSpec::uniform_range(-0.5, 1.0), protocol::InvalidSpec);
    CHECK_THROWS_AS(WaitingTimeSpec::exponential(0.0), protocol::InvalidSpec);

    rng::Stream st(1, 2);
    const auto fixed = WaitingTimeSpec::fixed(0.7);
    CHECK_FALSE(fixed.is_random());
    CHECK(fixed.sample(st) == 0.7);
    const auto uni = WaitingTimeSpec::uniform_range(0.5, 1.5);
    CHECK(uni.is_random());
    for (int i = 0; i < 1000; ++i) {
        const double t = uni.sample(st);
        CHECK(t >= 0.5);
        CHECK(t < 1.5);
    }
    const auto expo = WaitingTimeSpec::exponential(2.0);
    double mean = 0.0;
    for (int i = 0; i < 200000; ++i) mean += expo.sample(st);
    mean /= 200000.0;
    CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("build_chain: matrices are doubly stochastic") {
    const auto sys = tilted_spin1();
    const MeasurementChain chain = protocol::build_chain(sys.h, sys.o, {0.3, 0.9, 1.4, 0.2});
    CHECK(chain.measurements == 4);
    CHECK(chain.middle.size() == 3);
    CHECK(linalg::stochasticity_defect(chain.first) < 1e-12);
    CHECK(linalg::stochasticity_defect(chain.last) < 1e-12);
    for (const auto& t : chain.middle) CHECK(linalg::stochasticity_defect(t) < 1e-12);
}

TEST_CASE("build_chain rejects mismatched inputs") {
    const auto sys = tilted_spin1();
    CHECK_THROWS_AS(protocol::build_chain(sys.h, sys.o, {1.0, -0.5}), protocol::InvalidSpec);
}

TEST_CASE("exact_joint: no measurements gives diag(c)") {
    const auto sys = tilted_spin1();
    const InitialState s({0.8, 0.01, 0.19});
    const MeasurementChain chain = protocol::build_chain(sys.h, sys.o, {});
    CHECK(chain.empty());
    const auto joint = protocol::exact_joint(s, chain);
    DMatrix want(3);
    for (std::size_t k = 0; k < 3; ++k) want(k, k) = s.population(k);
    CHECK(max_abs(joint.p, want) < 1e-15);
}

TEST_CASE("exact_joint: commuting observable keeps diag(c) for any M") {
    // O diagonal in the energy basis: every chain matrix is the identity
    const auto sys = tilted_spin1();
    CMatrix diag_o(3);
    diag_o(0, 0) = 2.0;
    diag_o(1, 1) = -1.0;
    diag_o(2, 2) = 0.5;
    // O expressed directly in the energy eigenbasis: O_lab = V O_e V^+
    CMatrix o_lab(3);
    const CMatrix v = sys.h.vectors;
    const CMatrix tmp = v * diag_o;
    o_lab = tmp * linalg::adjoint(v);
    const Observable o = model::observable_from_matrix(o_lab, sys.h);
    CHECK(protocol::shares_eigenvector(o));

    const InitialState s({0.5, 0.2, 0.3});
    const auto joint =
        protocol::exact_joint(s, protocol::build_chain(sys.h, o, {0.4, 1.0, 0.6}));
    DMatrix want(3);
    for (std::size_t k = 0; k < 3; ++k) want(k, k) = s.population(k);
    CHECK(max_abs(joint.p, want) < 1e-10);
}

TEST_CASE("shares_eigenvector is false for the tilted system") {
    const auto sys = tilted_spin1();
    CHECK_FALSE(protocol::shares_eigenvector(sys.o));
}

TEST_CASE("exact_joint: M = 1 matches the explicit two-matrix product") {
    const auto sys = tilted_spin1();
    const InitialState s({0.8, 0.01, 0.19});
    const MeasurementChain chain = protocol::build_chain(sys.h, sys.o, {0.8});
    const auto joint = protocol::exact_joint(s, chain);
    for (std::size_t m = 0; m < 3; ++m)
        for (std::size_t n = 0; n < 3; ++n) {
            double want = 0.0;
            for (std::size_t j = 0; j < 3; ++j) want += chain.last(m, j) * chain.first(j, n);
            want *= s.population(n);
            CHECK(joint.p(m, n) == doctest::Approx(want).epsilon(1e-13));
        }
}

TEST_CASE("exact_joint matches the brute-force path-sum oracle at M = 3") {
    const auto sys = tilted_spin1();
    const InitialState s({0.8, 0.01, 0.19});
    const std::vector<double> taus{0.7, 1.1, 0.4};
    const auto joint = protocol::exact_joint(s, protocol::build_chain(sys.h, sys.o, taus));
    const CMatrix basis_o_lab = linalg::eig_hermitian(sys.o_lab).vectors;
    const DMatrix oracle =
        testing::path_sum_joint(sys.h_lab, sys.h.vectors, basis_o_lab, taus, s.populations());
    CHECK(max_abs(joint.p, oracle) < 1e-12);
}

TEST_CASE("exact_joint oracle agreement for random systems (property)") {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> ut(0.2, 1.5), uc(0.05, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const CMatrix h_lab = testing::random_hermitian(gen, 3);
        const CMatrix o_lab = testing::random_hermitian(gen, 3);
        const auto h = linalg::eig_hermitian(h_lab);
        const Observable o = model::observable_from_matrix(o_lab, h);
        double c1 = uc(gen), c2 = uc(gen), c3 = uc(gen);
        const double z = c1 + c2 + c3;
        const InitialState s({c1 / z, c2 / z, 1.0 - c1 / z - c2 / z});
        const std::vector<double> taus{ut(gen), ut(gen)};
        const auto joint = protocol::exact_joint(s, protocol::build_chain(h, o, taus));
        const DMatrix oracle = testing::path_sum_joint(
            h_lab, h.vectors, linalg::eig_hermitian(o_lab).vectors, taus, s.populations());
        CHECK(max_abs(joint.p, oracle) < 1e-12);
    }
}

TEST_CASE("exact_joint: column marginal is the initial distribution") {
    const auto sys = tilted_spin1();
    const InitialState s({0.8, 0.01, 0.19});
    const auto joint =
        protocol::exact_joint(s, protocol::build_chain(sys.h, sys.o, {0.5, 0.5, 0.5, 0.5, 0.5}));
    for (std::size_t n = 0; n < 3; ++n) {
        double col = 0.0;
        for (std::size_t m = 0; m < 3; ++m) col += joint.p(m, n);
        CHECK(col == doctest::Approx(s.population(n)).epsilon(1e-13));
    }
}

TEST_CASE("exact_joint: uniform input stays uniform in the final marginal") {
    const auto sys = tilted_spin1();
    const InitialState s({1.0 / 3, 1.0 / 3, 1.0 / 3});
    const auto joint =
        protocol::exact_joint(s, protocol::build_chain(sys.h, sys.o, {0.3, 1.2, 0.8}));
    for (std::size_t m = 0; m < 3; ++m) {
        double row = 0.0;
        for (std::size_t n = 0; n < 3; ++n) row += joint.p(m, n);
        CHECK(row == doctest::Approx(1.0 / 3).epsilon(1e-12));
    }
}

TEST_CASE("sample_trajectory: deterministic cases") {
    const auto sys = tilted_spin1();
    rng::Stream st(9, 0);
    // empty chain: the second energy measurement repeats the first
    const MeasurementChain empty = protocol::build_chain(sys.h, sys.o, {});
    for (int i = 0; i < 50; ++i) {
        const auto tr =
            protocol::sample_trajectory(st, InitialState({0.2, 0.5, 0.3}), empty, sys.e);
        CHECK(tr.final_index == tr.first_index);
        CHECK(tr.heat == 0.0);
    }
    // certain initial level plus a commuting observable: everything is frozen
    CMatrix d(3);
    d(0, 0) = 1.0;
    d(1, 1) = 2.0;
    d(2, 2) = 3.0;
    const CMatrix o_lab = (sys.h.vectors * d) * linalg::adjoint(sys.h.vectors);
    const Observable o = model::observable_from_matrix(o_lab, sys.h);
    const MeasurementChain frozen = protocol::build_chain(sys.h, o, {0.4, 0.9});
    for (int i = 0; i < 50; ++i) {
        const auto tr =
            protocol::sample_trajectory(st, InitialState({1.0, 0.0, 0.0}), frozen, sys.e, true);
        CHECK(tr.first_index == 0);
        CHECK(tr.final_index == 0);
        CHECK(std::abs(tr.heat) < 1e-12);
        CHECK(tr.intermediate.size() == 2);
    }
}

TEST_CASE("Monte Carlo frequencies concentrate on the exact joint") {
    const auto sys = tilted_spin1();
    const InitialState s({0.8, 0.01, 0.19});
    const std::uint64_t r = 100000;
    protocol::MonteCarloRun run;
    run.waiting_time = WaitingTimeSpec::fixed(1.0);
    run.measurements = 5;
    run.realizations = r;
    run.master_seed = 2024;
    run.workers = 2;
    const auto mc = protocol::run_monte_carlo(s, sys.h, sys.o, run);
    CHECK(mc.realizations == r);
    CHECK_FALSE(mc.locked_observable_warning);

    std::vector<double> taus(5, 1.0);
    const auto exact = protocol::exact_joint(s, protocol::build_chain(sys.h, sys.o, taus));
    std::uint64_t total = 0;
    for (std::size_t m = 0; m < 3; ++m)
        for (std::size_t n = 0; n < 3; ++n) {
            total += mc.counts[m][n];
            const double p = exact.p(m, n);
            const double sigma = std::sqrt(std::max(p * (1.0 - p) / r, 1e-18));
            CHECK(std::abs(mc.joint.p(m, n) - p) < 4.0 * sigma + 1e-9);
        }
    CHECK(total == r);
}

TEST_CASE("Monte Carlo error shrinks with the sample size") {
    const auto sys = tilted_spin1();
    const InitialState s({0.8, 0.01, 0.19});
    const auto exact =
        protocol::exact_joint(s, protocol::build_chain(sys.h, sys.o, {1.0, 1.0, 1.0}));
    double prev = 1.0;
    for (std::uint64_t r : {1000ull, 10000ull, 100000ull}) {
        protocol::MonteCarloRun run;
        run.measurements = 3;
        run.realizations = r;
        run.master_seed = 5150;
        run.workers = 4;
        const auto mc = protocol::run_monte_carlo(s, sys.h, sys.o, run);
        const double err = max_abs(mc.joint.p, exact.p);
        CHECK(err < prev + 0.02);
        prev = err;
    }
    CHECK(prev < 0.01);
}

TEST_CASE("Monte Carlo results are bit-identical across worker counts") {
    const auto sys = tilted_spin1();
    const InitialState s({0.5, 0.2, 0.3});
    protocol::MonteCarloRun run;
    run.waiting_time = WaitingTimeSpec::uniform_range(0.5, 1.5);
    run.measurements = 4;
    run.realizations = 20001; // deliberately not divisible by the worker count
    run.master_seed = 321;

    run.workers = 1;
    const auto one = protocol::run_monte_carlo(s, sys.h, sys.o, run);
    run.workers = 8;
    const auto eight = protocol::run_monte_carlo(s, sys.h, sys.o, run);
    for (std::size_t m = 0; m < 3; ++m)
        for (std::size_t n = 0; n < 3; ++n) CHECK(one.counts[m][n] == eight.counts[m][n]);
}

TEST_CASE("random waiting times keep the marginals of a uniform state uniform") {
    const auto sys = tilted_spin1();
    const InitialState s({1.0 / 3, 1.0 / 3, 1.0 / 3});
    protocol::MonteCarloRun run;
    run.waiting_time = WaitingTimeSpec::uniform_range(0.5, 1.5);
    run.measurements = 6;
    run.realizations = 300000;
    run.master_seed = 777;
    run.workers = 0; // hardware concurrency
    const auto mc = protocol::run_monte_carlo(s, sys.h, sys.o, run);
    for (std::size_t m = 0; m < 3; ++m) {
        double row = 0.0, col = 0.0;
        for (std::size_t n = 0; n < 3; ++n) {
            row += mc.joint.p(m, n);
            col += mc.joint.p(n, m);
        }
        CHECK(row == doctest::Approx(1.0 / 3).epsilon(0.03));
        CHECK(col == doctest::Approx(1.0 / 3).epsilon(0.03));
    }
}

TEST_CASE("locked observable raises the warning flag") {
    const auto sys = tilted_spin1();
    CMatrix d(3);
    d(0, 0) = 1.0;
    d(1, 1) = 2.0;
    d(2, 2) = 3.0;
    const CMatrix o_lab = (sys.h.vectors * d) * linalg::adjoint(sys.h.vectors);
    const Observable o = model::observable_from_matrix(o_lab, sys.h);
    protocol::MonteCarloRun run;
    run.measurements = 2;
    run.realizations = 100;
    run.master_seed = 1;
    const auto mc = protocol::run_monte_carlo(InitialState({0.5, 0.3, 0.2}), sys.h, o, run);
    CHECK(mc.locked_observable_warning);
}

TEST_CASE("heat_histogram: counts and support") {
    const auto sys = tilted_spin1();
    protocol::MonteCarloRun run;
    run.measurements = 3;
    run.realizations = 5000;
    run.master_seed = 42;
    const auto mc =
        protocol::run_monte_carlo(InitialState({0.8, 0.01, 0.19}), sys.h, sys.o, run);
    const auto hist = mc.heat_histogram(sys.e);
    std::uint64_t total = 0;
    double prev = -1e300;
    for (const auto& [q, count] : hist) {
        CHECK(q > prev);
        prev = q;
        total += count;
    }
    CHECK(total == run.realizations);
}
