// Physical model layer: energy spectra, observables (spin-1 conventions) and
// the initial-state parametrizations for three-level systems.

#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qheat/linalg.hpp"

namespace qheat::model {

struct ZeroPopulation : std::runtime_error {
    explicit ZeroPopulation(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateDirection : std::runtime_error {
    explicit DegenerateDirection(const std::string& what) : std::runtime_error(what) {}
};

// Ordered nondegenerate energy levels E_1 < ... < E_N.
class EnergySpectrum {
public:
    explicit EnergySpectrum(std::vector<double> levels);
    static EnergySpectrum from_eigensystem(const linalg::EigenSystem& es) {
        return EnergySpectrum(es.values);
    }

    std::size_t size() const noexcept { return levels_.size(); }
    double level(std::size_t k) const { return levels_.at(k); } // 0-based
    const std::vector<double>& levels() const noexcept { return levels_; }

    // N = 3 only: Delta_1 = E2-E1, Delta_2 = E3-E2, Delta_3 = E1-E3 (k = 1..3)
    double delta(int k) const;
    // v^2 = 3 (Delta_1^2 + Delta_2^2 + Delta_3^2)
    double v() const;

    double log_partition(double beta) const; // log sum_k e^{-beta E_k}, max-shifted
    double partition(double beta) const;

private:
    std::vector<double> levels_;
};

// Measured operator O: outcomes plus an orthonormal eigenbasis whose column k
// is |Omega_k> expressed in the energy basis.
struct Observable {
    std::vector<double> outcomes;
    linalg::CMatrix eigenbasis;
};

// Diagonalize o_lab (given in the same lab basis as the Hamiltonian behind h)
// and re-express its eigenbasis in the energy basis.
Observable observable_from_matrix(const linalg::CMatrix& o_lab, const linalg::EigenSystem& h);

// Diagonal populations c_k of rho_0 in the energy basis. Entries below 1e-300
// are clamped to exact zero.
class InitialState {
public:
    explicit InitialState(std::vector<double> populations);

    std::size_t size() const noexcept { return c_.size(); }
    double population(std::size_t k) const { return c_.at(k); }
    const std::vector<double>& populations() const noexcept { return c_; }

private:
    std::vector<double> c_;
};

struct AlphaBeta {
    double alpha = 0.0; // non-thermal component
    double beta = 0.0;  // thermal component
};

// Spin-1 operators in the Sz eigenbasis, ordered by descending magnetic number:
// Sz = diag(1, 0, -1), Sx with 1/sqrt(2) on the super/sub-diagonal.
std::pair<linalg::CMatrix, linalg::CMatrix> spin1_operators();

// Partial effective temperatures (b1, b2, b3) from the population ratios.
// Requires N = 3 and strictly positive populations.
std::array<double, 3> partial_temperatures(const InitialState& s, const EnergySpectrum& e);

// c_k = exp[-beta E_k + (alpha/v) (gap of the other two levels)^2] / Ztilde
InitialState alphabeta_to_populations(const AlphaBeta& ab, const EnergySpectrum& e);

// Inverse map via projection of (b1,b2,b3) onto (1,1,1) and
// d = (Delta3-Delta2, Delta1-Delta3, Delta2-Delta1).
AlphaBeta populations_to_alphabeta(const InitialState& s, const EnergySpectrum& e);

double log_pseudo_partition(const AlphaBeta& ab, const EnergySpectrum& e);
double pseudo_partition(const AlphaBeta& ab, const EnergySpectrum& e);

InitialState thermal_state(double beta, const EnergySpectrum& e);

enum class EdgePair { P12, P13, P23 };
EdgePair edge_pair_from_string(const std::string& s);

// Boundary states with exactly one vanishing population: the named pair gets
// (q, 1-q), the remaining level exactly 0. N = 3.
InitialState edge_state(double q, EdgePair pair);

} // namespace qheat::model
