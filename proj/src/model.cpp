#include "qheat/model.hpp"

#include <algorithm>
#include <cmath>

namespace qheat::model {

namespace {

constexpr double kMinGap = 1e-9;
constexpr double kZeroCutoff = 1e-300;

void require_n3(const EnergySpectrum& e, const char* who) {
    if (e.size() != 3)
        throw std::invalid_argument(std::string(who) + ": requires a 3-level spectrum");
}

// Max-shifted normalized exponentials of the given log-weights.
std::vector<double> softmax(const std::vector<double>& x) {
    const double m = *std::max_element(x.begin(), x.end());
    std::vector<double> w(x.size());
    double z = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        w[k] = std::exp(x[k] - m);
        z += w[k];
    }
    for (double& wk : w) wk /= z;
    return w;
}

double log_sum_exp(const std::vector<double>& x) {
    const double m = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (double xk : x) s += std::exp(xk - m);
    return m + std::log(s);
}

// Log-weights -beta E_k + (alpha/v) (gap of the other two levels)^2, k = 1..3.
std::vector<double> pseudo_log_weights(const AlphaBeta& ab, const EnergySpectrum& e) {
    const double av = ab.alpha / e.v();
    const double e1 = e.level(0), e2 = e.level(1), e3 = e.level(2);
    return {-ab.beta * e1 + av * (e2 - e3) * (e2 - e3),
            -ab.beta * e2 + av * (e3 - e1) * (e3 - e1),
            -ab.beta * e3 + av * (e1 - e2) * (e1 - e2)};
}

} // namespace

EnergySpectrum::EnergySpectrum(std::vector<double> levels) : levels_(std::move(levels)) {
    if (levels_.size() < 2)
        throw std::invalid_argument("EnergySpectrum: need at least 2 levels");
    for (std::size_t k = 0; k + 1 < levels_.size(); ++k) {
        if (!(levels_[k + 1] - levels_[k] > kMinGap))
            throw std::invalid_argument("EnergySpectrum: levels must be strictly increasing "
                                        "(min gap 1e-9), degenerate spectrum rejected");
    }
}

double EnergySpectrum::delta(int k) const {
    require_n3(*this, "EnergySpectrum::delta");
    switch (k) {
        case 1: return levels_[1] - levels_[0];
        case 2: return levels_[2] - levels_[1];
        case 3: return levels_[0] - levels_[2];
        default: throw std::invalid_argument("EnergySpectrum::delta: k must be 1..3");
    }
}

double EnergySpectrum::v() const {
    require_n3(*this, "EnergySpectrum::v");
    const double d1 = delta(1), d2 = delta(2), d3 = delta(3);
    return std::sqrt(3.0 * (d1 * d1 + d2 * d2 + d3 * d3));
}

double EnergySpectrum::log_partition(double beta) const {
    std::vector<double> x(levels_.size());
    for (std::size_t k = 0; k < levels_.size(); ++k) x[k] = -beta * levels_[k];
    return log_sum_exp(x);
}

double EnergySpectrum::partition(double beta) const {
    return std::exp(log_partition(beta));
}

Observable observable_from_matrix(const linalg::CMatrix& o_lab, const linalg::EigenSystem& h) {
    const linalg::EigenSystem eo = linalg::eig_hermitian(o_lab);
    for (std::size_t k = 0; k + 1 < eo.values.size(); ++k)
        if (!(eo.values[k + 1] - eo.values[k] > kMinGap))
            throw std::invalid_argument("observable_from_matrix: outcomes must be distinct");
    Observable o;
    o.outcomes = eo.values;
    o.eigenbasis = adjoint(h.vectors) * eo.vectors;
    return o;
}

InitialState::InitialState(std::vector<double> populations) : c_(std::move(populations)) {
    double sum = 0.0;
    for (double& ck : c_) {
        if (ck < 0.0)
            throw std::invalid_argument("InitialState: negative population");
        if (ck < kZeroCutoff) ck = 0.0;
        sum += ck;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("InitialState: populations must sum to 1");
}

std::pair<linalg::CMatrix, linalg::CMatrix> spin1_operators() {
    linalg::CMatrix sz(3), sx(3);
    sz(0, 0) = 1.0;
    sz(2, 2) = -1.0;
    const double r = 1.0 / std::sqrt(2.0);
    sx(0, 1) = sx(1, 0) = sx(1, 2) = sx(2, 1) = r;
    return {sz, sx};
}

std::array<double, 3> partial_temperatures(const InitialState& s, const EnergySpectrum& e) {
    require_n3(e, "partial_temperatures");
    if (s.size() != 3)
        throw std::invalid_argument("partial_temperatures: state must have 3 populations");
    const auto& c = s.populations();
    for (double ck : c)
        if (ck <= 0.0)
            throw ZeroPopulation("partial_temperatures: parametrization singular at c_k = 0");
    return {-std::log(c[1] / c[0]) / e.delta(1),
            -std::log(c[2] / c[1]) / e.delta(2),
            -std::log(c[0] / c[2]) / e.delta(3)};
}

InitialState alphabeta_to_populations(const AlphaBeta& ab, const EnergySpectrum& e) {
    require_n3(e, "alphabeta_to_populations");
    return InitialState(softmax(pseudo_log_weights(ab, e)));
}

AlphaBeta populations_to_alphabeta(const InitialState& s, const EnergySpectrum& e) {
    const std::array<double, 3> b = partial_temperatures(s, e);
    const std::array<double, 3> d = {e.delta(3) - e.delta(2),
                                     e.delta(1) - e.delta(3),
                                     e.delta(2) - e.delta(1)};
    const double dd = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    if (dd == 0.0)
        throw DegenerateDirection("populations_to_alphabeta: deviation direction vanishes");

    AlphaBeta ab;
    ab.beta = (b[0] + b[1] + b[2]) / 3.0;
    double bd = 0.0;
    for (int k = 0; k < 3; ++k) bd += (b[k] - ab.beta) * d[k];
    ab.alpha = e.v() * bd / dd;

    // b is constrained to the plane spanned by (1,1,1) and d, so the residual
    // of the two-direction decomposition is pure round-off.
    double res = 0.0;
    const double scale = std::max({1.0, std::abs(b[0]), std::abs(b[1]), std::abs(b[2])});
    for (int k = 0; k < 3; ++k)
        res = std::max(res, std::abs(b[k] - ab.beta - ab.alpha / e.v() * d[k]));
    if (res > 1e-9 * scale)
        throw std::runtime_error("populations_to_alphabeta: decomposition residual too large");
    return ab;
}

double log_pseudo_partition(const AlphaBeta& ab, const EnergySpectrum& e) {
    require_n3(e, "log_pseudo_partition");
    return log_sum_exp(pseudo_log_weights(ab, e));
}

double pseudo_partition(const AlphaBeta& ab, const EnergySpectrum& e) {
    return std::exp(log_pseudo_partition(ab, e));
}

InitialState thermal_state(double beta, const EnergySpectrum& e) {
    std::vector<double> x(e.size());
    for (std::size_t k = 0; k < e.size(); ++k) x[k] = -beta * e.level(k);
    return InitialState(softmax(x));
}

EdgePair edge_pair_from_string(const std::string& s) {
    if (s == "12") return EdgePair::P12;
    if (s == "13") return EdgePair::P13;
    if (s == "23") return EdgePair::P23;
    throw std::invalid_argument("edge pair must be one of 12, 13, 23");
}

InitialState edge_state(double q, EdgePair pair) {
    if (q < 0.0 || q > 1.0)
        throw std::invalid_argument("edge_state: q must lie in [0, 1]");
    switch (pair) {
        case EdgePair::P12: return InitialState({q, 1.0 - q, 0.0});
        case EdgePair::P13: return InitialState({q, 0.0, 1.0 - q});
        case EdgePair::P23: return InitialState({0.0, q, 1.0 - q});
    }
    throw std::invalid_argument("edge_state: bad pair");
}

} // namespace qheat::model
