#include "qheat/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qheat::analysis {

double char_from_joint(const protocol::JointOutcomeDistribution& joint,
                       const model::EnergySpectrum& e, double eps) {
    const std::size_t n = joint.p.dim();
    const double span = e.level(n - 1) - e.level(0);
    if (std::abs(eps) * span <= 50.0) {
        double g = 0.0;
        for (std::size_t m = 0; m < n; ++m)
            for (std::size_t col = 0; col < n; ++col)
                g += joint.p(m, col) * std::exp(-eps * (e.level(m) - e.level(col)));
        return g;
    }
    // log-sum-exp over the nonzero entries
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t col = 0; col < n; ++col)
            if (joint.p(m, col) > 0.0)
                mx = std::max(mx, std::log(joint.p(m, col)) - eps * (e.level(m) - e.level(col)));
    double s = 0.0;
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t col = 0; col < n; ++col)
            if (joint.p(m, col) > 0.0)
                s += std::exp(std::log(joint.p(m, col)) - eps * (e.level(m) - e.level(col)) - mx);
    return std::exp(mx + std::log(s));
}

protocol::JointOutcomeDistribution uniform_limit_joint(const model::InitialState& s) {
    const std::size_t n = s.size();
    protocol::JointOutcomeDistribution joint;
    joint.source = protocol::JointOutcomeDistribution::Source::Exact;
    joint.p = linalg::DMatrix(n);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t col = 0; col < n; ++col)
            joint.p(m, col) = s.population(col) / static_cast<double>(n);
    return joint;
}

double char_asymptotic(const model::AlphaBeta& ab, const model::EnergySpectrum& e, double eps) {
    const double log_g = (e.log_partition(eps) - e.log_partition(0.0)) +
                         (model::log_pseudo_partition({ab.alpha, ab.beta - eps}, e) -
                          model::log_pseudo_partition(ab, e));
    return std::exp(log_g);
}

CharPoint char_from_counts(const protocol::MonteCarloResult& mc, const model::EnergySpectrum& e,
                           double eps) {
    CharPoint pt;
    pt.eps = eps;
    const std::size_t n = mc.counts.size();
    const double r = static_cast<double>(mc.realizations);
    double mean = 0.0, second = 0.0;
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t col = 0; col < n; ++col) {
            if (mc.counts[m][col] == 0) continue;
            const double x = std::exp(-eps * (e.level(m) - e.level(col)));
            const double f = static_cast<double>(mc.counts[m][col]) / r;
            mean += f * x;
            second += f * x * x;
        }
    pt.value = mean;
    const double var = std::max(0.0, second - mean * mean);
    pt.std_error = std::sqrt(var / r);
    return pt;
}

BetaEffResult beta_eff(const std::function<double(double)>& g, double lo, double hi) {
    const double g0 = g(0.0);
    if (std::abs(g0 - 1.0) > 1e-9)
        throw std::invalid_argument("beta_eff: G(0) must equal 1");

    // dG/deps at 0, central differences
    constexpr double kStep = 1e-5;
    const double slope0 = (g(kStep) - g(-kStep)) / (2.0 * kStep);

    BetaEffResult res;
    if (std::abs(slope0) < 1e-8) {
        res.degenerate = true;
        return res;
    }

    // G dips below 1 on the side where it decreases and, being convex with
    // G(+-inf) -> +inf, crosses 1 exactly once there.
    const double side = slope0 < 0.0 ? 1.0 : -1.0;
    const double limit = side > 0.0 ? hi : -lo;

    double prev = 0.0;
    double eps = 1e-6 * side;
    bool found = false;
    while (std::abs(eps) <= limit) {
        if (g(eps) > 1.0 + 1e-12) {
            found = true;
            break;
        }
        prev = eps;
        eps *= 2.0;
    }
    if (!found) {
        const double boundary = side * limit;
        throw BracketNotFound("beta_eff: no bracket within search range; G(" +
                              std::to_string(boundary) + ") = " + std::to_string(g(boundary)));
    }

    double a = prev, b = eps; // G(a) <= 1 + 1e-12 < G(b)
    res.bracket = {a, b};
    while (std::abs(b - a) > 1e-12) {
        const double mid = 0.5 * (a + b);
        if (mid == a || mid == b) break;
        if (g(mid) > 1.0)
            b = mid;
        else
            a = mid;
    }
    res.value = 0.5 * (a + b);
    res.residual = std::abs(g(res.value) - 1.0);
    return res;
}

double beta_bar_asymptotic(const model::EnergySpectrum& e) {
    if (e.size() != 3)
        throw std::invalid_argument("beta_bar_asymptotic: requires a 3-level spectrum");
    const double e1 = e.level(0) - e.level(1);
    const double e3 = e.level(2) - e.level(1);
    if (std::abs(e1 + e3) < 1e-12) return 0.0;

    const auto f = [&](double x) { return std::exp(-x * e1) + std::exp(-x * e3) - 2.0; };
    const double side = e3 + e1 > 0.0 ? 1.0 : -1.0;

    double prev = 0.0;
    double x = 1e-9 * side;
    while (f(x) <= 0.0) {
        prev = x;
        x *= 2.0;
        if (std::abs(x) > 1e6)
            throw BracketNotFound("beta_bar_asymptotic: bracket expansion failed");
    }
    double a = prev, b = x;
    while (std::abs(b - a) > 1e-14) {
        const double mid = 0.5 * (a + b);
        if (mid == a || mid == b) break;
        if (f(mid) > 0.0)
            b = mid;
        else
            a = mid;
    }
    return 0.5 * (a + b);
}

double slope_r(const model::EnergySpectrum& e) {
    if (e.size() != 3)
        throw std::invalid_argument("slope_r: requires a 3-level spectrum");
    return (e.level(0) + e.level(2) - 2.0 * e.level(1)) / e.v();
}

model::AlphaBeta edge_alphabeta_divergence(double q, const model::EnergySpectrum& e, double y) {
    if (!(q > 0.0 && q < 1.0))
        throw std::invalid_argument("edge_alphabeta_divergence: q must lie in (0, 1)");
    if (!(y > 0.0))
        throw std::invalid_argument("edge_alphabeta_divergence: Y must be > 0");
    const double c2 = std::exp(-y);
    const model::InitialState s({q * (1.0 - c2), c2, (1.0 - q) * (1.0 - c2)});
    return model::populations_to_alphabeta(s, e);
}

double shannon_entropy(const model::InitialState& s) {
    double h = 0.0;
    for (double c : s.populations())
        if (c > 0.0) h -= c * std::log(c);
    return h;
}

} // namespace qheat::analysis
