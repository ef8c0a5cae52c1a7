// Measurement-chain engine: the two-point-measurement protocol with M
// intermediate projective measurements as a product of unistochastic matrices,
// the exact joint outcome distribution, and reproducible Monte Carlo sampling.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qheat/linalg.hpp"
#include "qheat/model.hpp"
#include "qheat/rng.hpp"

namespace qheat::protocol {

struct InvalidSpec : std::runtime_error {
    explicit InvalidSpec(const std::string& what) : std::runtime_error(what) {}
};

struct WaitingTimeSpec {
    enum class Kind { Fixed, UniformRange, Exponential };

    Kind kind = Kind::Fixed;
    double tau = 1.0;      // Fixed
    double tau_min = 0.0;  // UniformRange
    double tau_max = 0.0;
    double mean = 0.0;     // Exponential

    static WaitingTimeSpec fixed(double t);
    static WaitingTimeSpec uniform_range(double lo, double hi);
    static WaitingTimeSpec exponential(double mean);

    bool is_random() const noexcept { return kind != Kind::Fixed; }
    double sample(rng::Stream& stream) const;
};

// A (energy -> O basis, includes U(tau_1)), M-1 middle matrices (O -> O basis)
// and B (O -> energy basis, no propagator: the final energy measurement is
// immediate).
struct MeasurementChain {
    linalg::DMatrix first;
    std::vector<linalg::DMatrix> middle;
    linalg::DMatrix last;
    std::size_t measurements = 0; // M; 0 means an empty chain
    std::size_t dim = 0;

    bool empty() const noexcept { return measurements == 0; }
};

// taus.size() = M. When evolve_before_first is false the system is measured in
// the O basis immediately after the first energy measurement and taus[0] is
// unused (the variant with no evolution before the first O measurement).
MeasurementChain build_chain(const linalg::EigenSystem& h, const model::Observable& o,
                             const std::vector<double>& taus,
                             bool evolve_before_first = true);

// True when O shares an eigenvector with H; the uniform large-M limit fails
// because the dynamics lock in the common eigenstate.
bool shares_eigenvector(const model::Observable& o, double tol = 1e-10);

struct JointOutcomeDistribution {
    enum class Source { Exact, MonteCarlo };

    linalg::DMatrix p;  // p[m][n] = P(final E_m and initial E_n)
    Source source = Source::Exact;
    std::uint64_t realizations = 0; // MonteCarlo only
};

// p = B T^{(M-1)} ... T^{(1)} A diag(c), propagated column by column.
JointOutcomeDistribution exact_joint(const model::InitialState& s, const MeasurementChain& chain);

struct TrajectoryRecord {
    std::size_t first_index = 0;
    std::size_t final_index = 0;
    double heat = 0.0; // E_final - E_initial
    std::vector<std::size_t> intermediate;
};

TrajectoryRecord sample_trajectory(rng::Stream& stream, const model::InitialState& s,
                                   const MeasurementChain& chain, const model::EnergySpectrum& e,
                                   bool record_intermediate = false);

struct MonteCarloResult {
    JointOutcomeDistribution joint;
    std::vector<std::vector<std::uint64_t>> counts; // counts[m][n]
    std::uint64_t realizations = 0;
    std::uint64_t master_seed = 0;
    bool locked_observable_warning = false;

    // Distinct heat values with their counts, ascending in Q.
    std::vector<std::pair<double, std::uint64_t>> heat_histogram(const model::EnergySpectrum& e) const;
};

struct MonteCarloRun {
    WaitingTimeSpec waiting_time;
    std::size_t measurements = 0;       // M
    std::uint64_t realizations = 1;     // R
    std::uint64_t master_seed = 0;
    unsigned workers = 1;               // 0 = hardware concurrency
    bool evolve_before_first = true;
};

// Results are bit-identical for any worker count at fixed master_seed:
// trajectory t consumes only the counter-based stream keyed by (master_seed, t)
// and integer counts are summed in worker order.
MonteCarloResult run_monte_carlo(const model::InitialState& s, const linalg::EigenSystem& h,
                                 const model::Observable& o, const MonteCarloRun& run);

} // namespace qheat::protocol
