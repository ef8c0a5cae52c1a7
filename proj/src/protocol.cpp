#include "qheat/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

namespace qheat::protocol {

using linalg::CMatrix;
using linalg::DMatrix;

WaitingTimeSpec WaitingTimeSpec::fixed(double t) {
    if (!(t > 0.0)) throw InvalidSpec("waiting time must be > 0");
    WaitingTimeSpec w;
    w.kind = Kind::Fixed;
    w.tau = t;
    return w;
}

WaitingTimeSpec WaitingTimeSpec::uniform_range(double lo, double hi) {
    if (!(lo > 0.0) || !(hi >= lo)) throw InvalidSpec("uniform waiting-time range must satisfy 0 < min <= max");
    WaitingTimeSpec w;
    w.kind = Kind::UniformRange;
    w.tau_min = lo;
    w.tau_max = hi;
    return w;
}

WaitingTimeSpec WaitingTimeSpec::exponential(double mean) {
    if (!(mean > 0.0)) throw InvalidSpec("exponential waiting-time mean must be > 0");
    WaitingTimeSpec w;
    w.kind = Kind::Exponential;
    w.mean = mean;
    return w;
}

double WaitingTimeSpec::sample(rng::Stream& stream) const {
    switch (kind) {
        case Kind::Fixed: return tau;
        case Kind::UniformRange: return tau_min + (tau_max - tau_min) * stream.next_unit();
        case Kind::Exponential: return -mean * std::log(stream.next_unit_open());
    }
    throw InvalidSpec("bad waiting-time kind");
}

MeasurementChain build_chain(const linalg::EigenSystem& h, const model::Observable& o,
                             const std::vector<double>& taus, bool evolve_before_first) {
    const std::size_t n = h.values.size();
    if (o.eigenbasis.dim() != n)
        throw std::invalid_argument("build_chain: observable dimension mismatch");
    for (double t : taus)
        if (!(t > 0.0)) throw InvalidSpec("build_chain: waiting times must be > 0");

    MeasurementChain chain;
    chain.dim = n;
    chain.measurements = taus.size();
    if (taus.empty()) return chain;

    // Work in the energy eigenbasis, where U(tau) is diagonal. The observable
    // eigenbasis is already expressed there.
    linalg::EigenSystem diag_h;
    diag_h.values = h.values;
    diag_h.vectors = CMatrix::identity(n);

    const CMatrix omega_dag = adjoint(o.eigenbasis);

    // A[j][k] = |<Omega_j| U(tau_1) |E_k>|^2
    chain.first = evolve_before_first
                      ? linalg::overlap_stochastic(o.eigenbasis, propagator(diag_h, taus[0]))
                      : linalg::overlap_stochastic(o.eigenbasis, CMatrix::identity(n));

    // T[j][k] = |<Omega_j| U(tau_i) |Omega_k>|^2
    chain.middle.reserve(taus.size() - 1);
    for (std::size_t i = 1; i < taus.size(); ++i) {
        const CMatrix u = propagator(diag_h, taus[i]);
        chain.middle.push_back(linalg::overlap_stochastic(o.eigenbasis, u * o.eigenbasis));
    }

    // B[m][j] = |<E_m|Omega_j>|^2
    DMatrix b(n);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t j = 0; j < n; ++j) b(m, j) = std::norm(o.eigenbasis(m, j));
    chain.last = b;
    return chain;
}

bool shares_eigenvector(const model::Observable& o, double tol) {
    const std::size_t n = o.eigenbasis.dim();
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
            if (std::norm(o.eigenbasis(k, j)) > 1.0 - tol) return true;
    return false;
}

JointOutcomeDistribution exact_joint(const model::InitialState& s, const MeasurementChain& chain) {
    const std::size_t n = s.size();
    JointOutcomeDistribution joint;
    joint.source = JointOutcomeDistribution::Source::Exact;
    joint.p = DMatrix(n);

    if (chain.empty()) {
        for (std::size_t k = 0; k < n; ++k) joint.p(k, k) = s.population(k);
        return joint;
    }
    if (chain.dim != n)
        throw std::invalid_argument("exact_joint: state/chain dimension mismatch");

    std::vector<double> w(n), next(n);
    for (std::size_t col = 0; col < n; ++col) {
        for (std::size_t j = 0; j < n; ++j) w[j] = chain.first(j, col) * s.population(col);
        for (const DMatrix& t : chain.middle) {
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k) acc += t(j, k) * w[k];
                next[j] = acc;
            }
            w.swap(next);
        }
        for (std::size_t m = 0; m < n; ++m) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += chain.last(m, j) * w[j];
            joint.p(m, col) = acc;
        }
    }
    return joint;
}

namespace {

// Draw an index from the (sub-normalized only by round-off) column `col` of m.
std::size_t draw_column(rng::Stream& stream, const DMatrix& m, std::size_t col) {
    const std::size_t n = m.dim();
    const double u = stream.next_unit();
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        acc += m(j, col);
        if (u < acc) return j;
    }
    return n - 1;
}

std::size_t draw_populations(rng::Stream& stream, const model::InitialState& s) {
    const double u = stream.next_unit();
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        acc += s.population(k);
        if (u < acc) return k;
    }
    return s.size() - 1;
}

} // namespace

TrajectoryRecord sample_trajectory(rng::Stream& stream, const model::InitialState& s,
                                   const MeasurementChain& chain, const model::EnergySpectrum& e,
                                   bool record_intermediate) {
    TrajectoryRecord rec;
    rec.first_index = draw_populations(stream, s);
    if (chain.empty()) {
        rec.final_index = rec.first_index;
        rec.heat = 0.0;
        return rec;
    }
    std::size_t idx = draw_column(stream, chain.first, rec.first_index);
    if (record_intermediate) rec.intermediate.push_back(idx);
    for (const DMatrix& t : chain.middle) {
        idx = draw_column(stream, t, idx);
        if (record_intermediate) rec.intermediate.push_back(idx);
    }
    rec.final_index = draw_column(stream, chain.last, idx);
    rec.heat = e.level(rec.final_index) - e.level(rec.first_index);
    return rec;
}

MonteCarloResult run_monte_carlo(const model::InitialState& s, const linalg::EigenSystem& h,
                                 const model::Observable& o, const MonteCarloRun& run) {
    if (run.realizations < 1) throw InvalidSpec("run_monte_carlo: need at least one realization");
    const std::size_t n = s.size();
    const model::EnergySpectrum spectrum(h.values);

    // Fixed waiting times: one shared chain. Random: rebuilt per trajectory
    // from that trajectory's stream (taus drawn first, then outcome draws).
    MeasurementChain shared_chain;
    if (!run.waiting_time.is_random()) {
        shared_chain = build_chain(h, o, std::vector<double>(run.measurements, run.waiting_time.tau),
                                   run.evolve_before_first);
    }

    unsigned workers = run.workers == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                        : run.workers;
    workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, run.realizations));

    std::vector<std::vector<std::uint64_t>> partial(workers,
                                                    std::vector<std::uint64_t>(n * n, 0));

    auto work = [&](unsigned w, std::uint64_t lo, std::uint64_t hi) {
        auto& counts = partial[w];
        for (std::uint64_t t = lo; t < hi; ++t) {
            rng::Stream stream(run.master_seed, t);
            TrajectoryRecord rec;
            if (run.waiting_time.is_random()) {
                std::vector<double> taus(run.measurements);
                for (double& tau : taus) tau = run.waiting_time.sample(stream);
                const MeasurementChain chain = build_chain(h, o, taus, run.evolve_before_first);
                rec = sample_trajectory(stream, s, chain, spectrum);
            } else {
                rec = sample_trajectory(stream, s, shared_chain, spectrum);
            }
            ++counts[rec.final_index * n + rec.first_index];
        }
    };

    if (workers == 1) {
        work(0, 0, run.realizations);
    } else {
        std::vector<std::thread> threads;
        const std::uint64_t block = (run.realizations + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::uint64_t lo = w * block;
            const std::uint64_t hi = std::min<std::uint64_t>(lo + block, run.realizations);
            threads.emplace_back(work, w, lo, hi);
        }
        for (auto& th : threads) th.join();
    }

    MonteCarloResult result;
    result.realizations = run.realizations;
    result.master_seed = run.master_seed;
    result.locked_observable_warning = run.measurements > 0 && shares_eigenvector(o);
    result.counts.assign(n, std::vector<std::uint64_t>(n, 0));
    for (unsigned w = 0; w < workers; ++w)
        for (std::size_t m = 0; m < n; ++m)
            for (std::size_t col = 0; col < n; ++col)
                result.counts[m][col] += partial[w][m * n + col];

    result.joint.source = JointOutcomeDistribution::Source::MonteCarlo;
    result.joint.realizations = run.realizations;
    result.joint.p = DMatrix(n);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t col = 0; col < n; ++col)
            result.joint.p(m, col) = static_cast<double>(result.counts[m][col]) /
                                     static_cast<double>(run.realizations);
    return result;
}

std::vector<std::pair<double, std::uint64_t>>
MonteCarloResult::heat_histogram(const model::EnergySpectrum& e) const {
    std::map<double, std::uint64_t> hist;
    const std::size_t n = counts.size();
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t col = 0; col < n; ++col)
            if (counts[m][col] > 0) hist[e.level(m) - e.level(col)] += counts[m][col];
    return {hist.begin(), hist.end()};
}

} // namespace qheat::protocol
