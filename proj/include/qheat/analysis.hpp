// Quantum-heat statistics: characteristic functions G(eps) = <e^{-eps Q}>
// (exact, empirical and large-M closed form), the effective inverse
// temperature beta_eff with G(beta_eff) = 1, and the asymptotic formulas for
// large |alpha|.

#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qheat/model.hpp"
#include "qheat/protocol.hpp"

namespace qheat::analysis {

struct BracketNotFound : std::runtime_error {
    explicit BracketNotFound(const std::string& what) : std::runtime_error(what) {}
};

// G(eps) = sum_{m,n} p[m][n] e^{-eps (E_m - E_n)}; switches to log-sum-exp
// evaluation once |eps (E_m - E_n)| exceeds 50.
double char_from_joint(const protocol::JointOutcomeDistribution& p, const model::EnergySpectrum& e,
                       double eps);

// The large-M joint p[m][n] = c_n / N (final state uniform, independent of the
// initial outcome).
protocol::JointOutcomeDistribution uniform_limit_joint(const model::InitialState& s);

// Closed form G(eps; alpha, beta) = [Z(eps)/Z(0)] [Ztilde(alpha, beta-eps)/Ztilde(alpha, beta)].
double char_asymptotic(const model::AlphaBeta& ab, const model::EnergySpectrum& e, double eps);

// Empirical G with a per-eps standard error from the trajectory-level variance
// of e^{-eps Q}.
struct CharPoint {
    double eps = 0.0;
    double value = 0.0;
    double std_error = 0.0;
};
CharPoint char_from_counts(const protocol::MonteCarloResult& mc, const model::EnergySpectrum& e,
                           double eps);

struct BetaEffResult {
    double value = 0.0;
    bool degenerate = false; // dG/deps(0) = 0: beta_eff = 0 is the only root
    std::pair<double, double> bracket{0.0, 0.0};
    double residual = 0.0;   // |G(value) - 1|
};

// Nontrivial root of G(eps) = 1 for a convex G with G(0) = 1: geometric
// bracket expansion from |eps| = 1e-6 on the side where G initially
// decreases, then bisection.
BetaEffResult beta_eff(const std::function<double(double)>& g, double lo = -1e3, double hi = 1e3);

// Nonzero root of e^{-x(E1-E2)} + e^{-x(E3-E2)} = 2, the beta_eff plateau for
// a large positive alpha. Zero when the spectrum is symmetric about E2.
double beta_bar_asymptotic(const model::EnergySpectrum& e);

// Slope of the large-negative-alpha linear regime: r = (E1 + E3 - 2 E2)/v.
double slope_r(const model::EnergySpectrum& e);

// (alpha, beta) image of c = (q(1-e^{-Y}), e^{-Y}, (1-q)(1-e^{-Y})); diverges
// linearly in Y with alpha/Y -> -v/(3 Delta1 Delta2) and beta/alpha -> -r in
// this library's (alpha, beta) normalization; the q dependence survives only
// in the subleading terms.
model::AlphaBeta edge_alphabeta_divergence(double q, const model::EnergySpectrum& e, double y);

// -sum c_k ln c_k (von Neumann entropy of a diagonal state)
double shannon_entropy(const model::InitialState& s);

} // namespace qheat::analysis
