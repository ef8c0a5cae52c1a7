#include "qheat/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qheat::app {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- dataset io

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string render_csv(const Table& t) {
    std::ostringstream os;
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << (i ? "," : "") << row[i];
        os << '\n';
    }
    return os.str();
}

std::string render_json(const Table& t) {
    json doc;
    doc["columns"] = t.columns;
    doc["rows"] = t.rows;
    return doc.dump(2) + "\n";
}

void atomic_write(const fs::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os << content;
        if (!os) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

void write_table(const Table& t, const fs::path& path, const std::string& format) {
    atomic_write(path, format == "json" ? render_json(t) : render_csv(t));
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// ------------------------------------------------------------ config parsing

namespace {

const json& require_key(const json& j, const std::string& key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError("config: missing key '" + where + key + "'");
    return *it;
}

double as_number(const json& j, const std::string& key) {
    if (!j.is_number()) throw ConfigError("config: key '" + key + "' must be a number");
    return j.get<double>();
}

linalg::CMatrix parse_matrix(const json& j, const std::string& key) {
    if (!j.is_array() || j.empty())
        throw ConfigError("config: key '" + key + "' must be a non-empty array of rows");
    const std::size_t n = j.size();
    linalg::CMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!j[i].is_array() || j[i].size() != n)
            throw ConfigError("config: key '" + key + "' must be a square matrix");
        for (std::size_t k = 0; k < n; ++k) {
            const json& e = j[i][k];
            if (e.is_number())
                m(i, k) = e.get<double>();
            else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number())
                m(i, k) = linalg::cxd(e[0].get<double>(), e[1].get<double>());
            else
                throw ConfigError("config: entries of '" + key +
                                  "' must be numbers or [re, im] pairs");
        }
    }
    return m;
}

std::string strip_spaces(std::string s) {
    s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
    return s;
}

linalg::CMatrix scaled_sum(const linalg::CMatrix& a, double wa, const linalg::CMatrix& b,
                           double wb) {
    linalg::CMatrix r(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = 0; j < a.dim(); ++j) r(i, j) = wa * a(i, j) + wb * b(i, j);
    return r;
}

linalg::CMatrix named_hamiltonian(const std::string& name, double w1, double w2) {
    const auto [sz, sx] = model::spin1_operators();
    const std::string n = strip_spaces(name);
    if (n == "w1*Sz+w2*Sx") return scaled_sum(sz, w1, sx, w2);
    if (n == "w1*Sz^2+w2*Sx") return scaled_sum(sz * sz, w1, sx, w2);
    throw ConfigError("config: unknown system name '" + name +
                      "' (expected 'w1*Sz + w2*Sx' or 'w1*Sz^2 + w2*Sx')");
}

protocol::WaitingTimeSpec parse_waiting_time(const json& j) {
    const std::string kind = require_key(j, "kind", "protocol.waiting_time.").get<std::string>();
    try {
        if (kind == "fixed")
            return protocol::WaitingTimeSpec::fixed(
                as_number(require_key(j, "tau", "protocol.waiting_time."), "tau"));
        if (kind == "uniform-range")
            return protocol::WaitingTimeSpec::uniform_range(
                as_number(require_key(j, "min", "protocol.waiting_time."), "min"),
                as_number(require_key(j, "max", "protocol.waiting_time."), "max"));
        if (kind == "exponential")
            return protocol::WaitingTimeSpec::exponential(
                as_number(require_key(j, "mean", "protocol.waiting_time."), "mean"));
    } catch (const protocol::InvalidSpec& e) {
        throw ConfigError(std::string("config: protocol.waiting_time: ") + e.what());
    }
    throw ConfigError("config: protocol.waiting_time.kind must be one of "
                      "fixed, uniform-range, exponential");
}

} // namespace

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig cfg;
    cfg.raw = j;

    // system (required)
    const json& sys = require_key(j, "system", "");
    if (sys.contains("name")) {
        const double w1 = sys.contains("w1") ? as_number(sys["w1"], "system.w1") : 1.0;
        const double w2 = sys.contains("w2") ? as_number(sys["w2"], "system.w2") : 0.5;
        cfg.h_lab = named_hamiltonian(sys["name"].get<std::string>(), w1, w2);
    } else if (sys.contains("matrix")) {
        cfg.h_lab = parse_matrix(sys["matrix"], "system.matrix");
    } else {
        throw ConfigError("config: system needs either 'name' or 'matrix'");
    }

    // observable (default: Sz, three-level systems only)
    if (j.contains("observable") && j["observable"].contains("matrix")) {
        cfg.o_lab = parse_matrix(j["observable"]["matrix"], "observable.matrix");
        if (cfg.o_lab.dim() != cfg.h_lab.dim())
            throw ConfigError("config: observable.matrix dimension does not match system");
    } else {
        const std::string name = j.contains("observable")
                                     ? require_key(j["observable"], "name", "observable.")
                                           .get<std::string>()
                                     : "Sz";
        if (name != "Sz")
            throw ConfigError("config: observable.name must be 'Sz' (or give a matrix)");
        if (cfg.h_lab.dim() != 3)
            throw ConfigError("config: observable 'Sz' requires a 3-level system");
        cfg.o_lab = model::spin1_operators().first;
    }

    // initial state (required)
    const json& st = require_key(j, "initial_state", "");
    if (st.contains("populations")) {
        cfg.state_kind = ExperimentConfig::StateKind::Populations;
        cfg.populations = st["populations"].get<std::vector<double>>();
        if (cfg.populations.size() != cfg.h_lab.dim())
            throw ConfigError("config: initial_state.populations size does not match system");
    } else if (st.contains("alpha") && st.contains("beta")) {
        cfg.state_kind = ExperimentConfig::StateKind::AlphaBeta;
        cfg.ab = {as_number(st["alpha"], "initial_state.alpha"),
                  as_number(st["beta"], "initial_state.beta")};
    } else if (st.contains("thermal_beta")) {
        cfg.state_kind = ExperimentConfig::StateKind::Thermal;
        cfg.thermal_beta = as_number(st["thermal_beta"], "initial_state.thermal_beta");
    } else if (st.contains("edge_q")) {
        cfg.state_kind = ExperimentConfig::StateKind::Edge;
        cfg.edge_q = as_number(st["edge_q"], "initial_state.edge_q");
        cfg.edge_pair = model::edge_pair_from_string(
            require_key(st, "edge_pair", "initial_state.").get<std::string>());
    } else {
        throw ConfigError("config: initial_state needs populations, alpha+beta, "
                          "thermal_beta, or edge_q+edge_pair");
    }

    if (j.contains("protocol")) {
        const json& pr = j["protocol"];
        if (pr.contains("measurements")) {
            const double m = as_number(pr["measurements"], "protocol.measurements");
            if (m < 0 || m != std::floor(m))
                throw ConfigError("config: protocol.measurements must be a non-negative integer");
            cfg.measurements = static_cast<std::size_t>(m);
        }
        if (pr.contains("waiting_time")) cfg.waiting_time = parse_waiting_time(pr["waiting_time"]);
        if (pr.contains("evolve_before_first"))
            cfg.evolve_before_first = pr["evolve_before_first"].get<bool>();
    }

    if (j.contains("run")) {
        const json& rn = j["run"];
        if (rn.contains("mode")) {
            const std::string mode = rn["mode"].get<std::string>();
            if (mode == "exact")
                cfg.mode = ExperimentConfig::Mode::Exact;
            else if (mode == "monte-carlo")
                cfg.mode = ExperimentConfig::Mode::MonteCarlo;
            else if (mode == "both")
                cfg.mode = ExperimentConfig::Mode::Both;
            else
                throw ConfigError("config: run.mode must be exact, monte-carlo or both");
        }
        if (rn.contains("realizations")) {
            const double r = as_number(rn["realizations"], "run.realizations");
            if (r < 1) throw ConfigError("config: run.realizations must be >= 1");
            cfg.realizations = static_cast<std::uint64_t>(r);
        }
        if (rn.contains("master_seed"))
            cfg.master_seed = rn["master_seed"].get<std::uint64_t>();
        if (rn.contains("workers")) cfg.workers = rn["workers"].get<unsigned>();
    }

    if (j.contains("outputs")) {
        const json& out = j["outputs"];
        if (out.contains("dir")) cfg.out_dir = out["dir"].get<std::string>();
        if (out.contains("prefix")) cfg.prefix = out["prefix"].get<std::string>();
        if (out.contains("format")) {
            cfg.format = out["format"].get<std::string>();
            if (cfg.format != "csv" && cfg.format != "json")
                throw ConfigError("config: outputs.format must be csv or json");
        }
        if (out.contains("epsilon")) {
            const json& eg = out["epsilon"];
            cfg.eps_min = as_number(require_key(eg, "min", "outputs.epsilon."), "min");
            cfg.eps_max = as_number(require_key(eg, "max", "outputs.epsilon."), "max");
            cfg.eps_points = require_key(eg, "points", "outputs.epsilon.").get<int>();
            if (cfg.eps_points < 2 || !(cfg.eps_max > cfg.eps_min))
                throw ConfigError("config: outputs.epsilon needs min < max and points >= 2");
        }
    }

    if (cfg.waiting_time.is_random() && cfg.mode != ExperimentConfig::Mode::MonteCarlo)
        throw ConfigError("config: run.mode exact/both requires a fixed waiting time "
                          "(the exact engine evaluates one tau sequence)");
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read config file " + path.string());
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: invalid JSON in " + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

void apply_overrides(ExperimentConfig& cfg, const GlobalOptions& opts) {
    if (opts.seed) cfg.master_seed = *opts.seed;
    if (opts.workers) cfg.workers = *opts.workers;
    if (opts.format) cfg.format = *opts.format;
}

BuiltSystem build_system(const ExperimentConfig& cfg) {
    linalg::EigenSystem h;
    try {
        h = linalg::eig_hermitian(cfg.h_lab);
    } catch (const linalg::NonHermitianInput& e) {
        throw ConfigError(std::string("config: system.matrix: ") + e.what());
    }
    model::EnergySpectrum spectrum = model::EnergySpectrum::from_eigensystem(h);
    model::Observable o;
    try {
        o = model::observable_from_matrix(cfg.o_lab, h);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: observable: ") + e.what());
    }
    return {std::move(h), std::move(spectrum), std::move(o)};
}

model::InitialState resolve_initial_state(const ExperimentConfig& cfg,
                                          const model::EnergySpectrum& e) {
    switch (cfg.state_kind) {
        case ExperimentConfig::StateKind::Populations: {
            try {
                return model::InitialState(cfg.populations);
            } catch (const std::exception& ex) {
                throw ConfigError(std::string("config: initial_state.populations: ") + ex.what());
            }
        }
        case ExperimentConfig::StateKind::AlphaBeta:
            if (e.size() != 3)
                throw ConfigError("config: alpha/beta initial state requires a 3-level system");
            return model::alphabeta_to_populations(cfg.ab, e);
        case ExperimentConfig::StateKind::Thermal:
            return model::thermal_state(cfg.thermal_beta, e);
        case ExperimentConfig::StateKind::Edge:
            if (e.size() != 3)
                throw ConfigError("config: edge initial state requires a 3-level system");
            try {
                return model::edge_state(cfg.edge_q, cfg.edge_pair);
            } catch (const std::exception& ex) {
                throw ConfigError(std::string("config: initial_state.edge_q: ") + ex.what());
            }
    }
    throw ConfigError("config: bad initial_state");
}

// --------------------------------------------------------------- experiments

namespace {

std::vector<double> eps_grid(double lo, double hi, int points) {
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i)
        g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    return g;
}

Table joint_table(const protocol::JointOutcomeDistribution& joint, const model::EnergySpectrum& e,
                  std::uint64_t realizations) {
    const bool mc = joint.source == protocol::JointOutcomeDistribution::Source::MonteCarlo;
    Table t;
    t.columns = {"n", "m", "E_n", "E_m", "Q", "probability", "std_error"};
    const std::size_t n = joint.p.dim();
    for (std::size_t first = 0; first < n; ++first)
        for (std::size_t fin = 0; fin < n; ++fin) {
            const double p = joint.p(fin, first);
            const double se =
                mc ? std::sqrt(std::max(0.0, p * (1.0 - p) / static_cast<double>(realizations)))
                   : 0.0;
            t.rows.push_back({std::to_string(first + 1), std::to_string(fin + 1),
                              fmt17(e.level(first)), fmt17(e.level(fin)),
                              fmt17(e.level(fin) - e.level(first)), fmt17(p), fmt17(se)});
        }
    return t;
}

json beta_eff_report(const std::function<double(double)>& g) {
    json rep;
    try {
        const analysis::BetaEffResult r = analysis::beta_eff(g);
        rep["value"] = r.value;
        rep["degenerate"] = r.degenerate;
        rep["residual"] = r.residual;
        rep["bracket"] = {r.bracket.first, r.bracket.second};
    } catch (const std::exception& e) {
        rep["error"] = e.what();
    }
    return rep;
}

} // namespace

nlohmann::json run_experiment(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const BuiltSystem sys = build_system(cfg);
    const model::InitialState state = resolve_initial_state(cfg, sys.spectrum);

    json summary;
    summary["engine_version"] = kVersion;
    {
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(cfg.raw.dump())));
        summary["config_hash"] = "0x" + std::string(buf);
    }
    summary["master_seed"] = cfg.master_seed;
    summary["mode"] = cfg.mode == ExperimentConfig::Mode::Exact        ? "exact"
                      : cfg.mode == ExperimentConfig::Mode::MonteCarlo ? "monte-carlo"
                                                                       : "both";
    json warnings = json::array();
    if (cfg.measurements > 0 && protocol::shares_eigenvector(sys.observable))
        warnings.push_back("observable shares an eigenvector with H: the dynamics lock "
                           "and the uniform large-M limit does not apply");

    const std::string ext = cfg.format == "json" ? ".json" : ".csv";
    const auto grid = eps_grid(cfg.eps_min, cfg.eps_max, cfg.eps_points);

    Table characteristic;
    characteristic.columns = {"epsilon", "G", "std_error", "provenance"};

    const bool want_exact = cfg.mode != ExperimentConfig::Mode::MonteCarlo;
    const bool want_mc = cfg.mode != ExperimentConfig::Mode::Exact;

    std::optional<protocol::JointOutcomeDistribution> exact;
    if (want_exact) {
        const protocol::MeasurementChain chain =
            protocol::build_chain(sys.h, sys.observable,
                                  std::vector<double>(cfg.measurements, cfg.waiting_time.tau),
                                  cfg.evolve_before_first);
        exact = protocol::exact_joint(state, chain);
        write_table(joint_table(*exact, sys.spectrum, 0),
                    cfg.out_dir / (cfg.prefix + "_joint_exact" + ext), cfg.format);
        for (double eps : grid)
            characteristic.rows.push_back(
                {fmt17(eps), fmt17(analysis::char_from_joint(*exact, sys.spectrum, eps)),
                 fmt17(0.0), "exact"});
        summary["beta_eff"]["exact"] = beta_eff_report(
            [&](double eps) { return analysis::char_from_joint(*exact, sys.spectrum, eps); });
    }

    std::optional<protocol::MonteCarloResult> mc;
    if (want_mc) {
        protocol::MonteCarloRun run;
        run.waiting_time = cfg.waiting_time;
        run.measurements = cfg.measurements;
        run.realizations = cfg.realizations;
        run.master_seed = cfg.master_seed;
        run.workers = cfg.workers;
        run.evolve_before_first = cfg.evolve_before_first;
        mc = protocol::run_monte_carlo(state, sys.h, sys.observable, run);
        write_table(joint_table(mc->joint, sys.spectrum, mc->realizations),
                    cfg.out_dir / (cfg.prefix + "_joint_mc" + ext), cfg.format);
        for (double eps : grid) {
            const analysis::CharPoint pt = analysis::char_from_counts(*mc, sys.spectrum, eps);
            characteristic.rows.push_back(
                {fmt17(eps), fmt17(pt.value), fmt17(pt.std_error), "monte-carlo"});
        }
        json rep = beta_eff_report(
            [&](double eps) { return analysis::char_from_counts(*mc, sys.spectrum, eps).value; });
        // Sampling noise dominates the 1e-10 residual target: accept within 3
        // standard errors of G at the root.
        if (rep.contains("value") && !rep["degenerate"].get<bool>()) {
            const analysis::CharPoint at_root =
                analysis::char_from_counts(*mc, sys.spectrum, rep["value"].get<double>());
            rep["residual_within_3se"] =
                rep["residual"].get<double>() <= 3.0 * at_root.std_error + 1e-10;
        }
        summary["beta_eff"]["monte_carlo"] = rep;
    }

    // Large-M closed form, available whenever the state sits in the (alpha, beta) chart.
    if (sys.spectrum.size() == 3 &&
        std::all_of(state.populations().begin(), state.populations().end(),
                    [](double c) { return c > 0.0; })) {
        const model::AlphaBeta ab = model::populations_to_alphabeta(state, sys.spectrum);
        for (double eps : grid)
            characteristic.rows.push_back(
                {fmt17(eps), fmt17(analysis::char_asymptotic(ab, sys.spectrum, eps)), fmt17(0.0),
                 "asymptotic-closed-form"});
        summary["alpha"] = ab.alpha;
        summary["beta"] = ab.beta;
        summary["beta_eff"]["closed_form"] = beta_eff_report(
            [&](double eps) { return analysis::char_asymptotic(ab, sys.spectrum, eps); });
    }

    write_table(characteristic, cfg.out_dir / (cfg.prefix + "_characteristic" + ext), cfg.format);

    summary["warnings"] = warnings;
    summary["levels"] = sys.spectrum.levels();
    summary["populations"] = state.populations();
    if (mc) summary["realizations"] = mc->realizations;
    summary["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    atomic_write(cfg.out_dir / (cfg.prefix + "_summary.json"), summary.dump(2) + "\n");
    return summary;
}

// -------------------------------------------------------------- figure recipes

namespace {

struct Spin1System {
    linalg::EigenSystem h;
    model::EnergySpectrum spectrum;
    model::Observable observable;
};

Spin1System spin1_system(double w1, double w2, bool z_squared) {
    const auto [sz, sx] = model::spin1_operators();
    const linalg::CMatrix h_lab =
        z_squared ? scaled_sum(sz * sz, w1, sx, w2) : scaled_sum(sz, w1, sx, w2);
    linalg::EigenSystem h = linalg::eig_hermitian(h_lab);
    model::EnergySpectrum spectrum = model::EnergySpectrum::from_eigensystem(h);
    model::Observable o = model::observable_from_matrix(sz, h);
    return {std::move(h), std::move(spectrum), std::move(o)};
}

constexpr std::uint64_t kDefaultReproduceSeed = 20200515;

struct RecipeEnv {
    fs::path out;
    std::uint64_t seed = kDefaultReproduceSeed;
    unsigned workers = 0;
    std::string format = "csv";
};

std::string trim_number(double x) {
    std::string s = std::to_string(x);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

void recipe_fig1(const RecipeEnv& env) {
    // Two-level system, E = (-1, 1), M = 5 fixed tau = 0.5, beta = 3/2,
    // R = 2000 per grid point, c1 on a 101-point grid. The paper's |a|^2
    // legend values are not published; defaults {0.25, 0.5, 0.75}.
    linalg::EigenSystem h;
    h.values = {-1.0, 1.0};
    h.vectors = linalg::CMatrix::identity(2);
    const model::EnergySpectrum spectrum({-1.0, 1.0});
    const double beta = 1.5;

    Table t;
    t.columns = {"a2", "c1", "G", "std_error"};
    for (double a2 : {0.25, 0.5, 0.75}) {
        const double a = std::sqrt(a2), b = std::sqrt(1.0 - a2);
        model::Observable o;
        o.outcomes = {1.0, -1.0};
        o.eigenbasis = linalg::CMatrix(2);
        o.eigenbasis(0, 0) = a;
        o.eigenbasis(1, 0) = -b;
        o.eigenbasis(0, 1) = b;
        o.eigenbasis(1, 1) = a;
        for (int i = 0; i <= 100; ++i) {
            const double c1 = static_cast<double>(i) / 100.0;
            const model::InitialState state({c1, 1.0 - c1});
            protocol::MonteCarloRun run;
            run.waiting_time = protocol::WaitingTimeSpec::fixed(0.5);
            run.measurements = 5;
            run.realizations = 2000;
            run.master_seed = env.seed;
            run.workers = env.workers;
            const protocol::MonteCarloResult mc =
                protocol::run_monte_carlo(state, h, o, run);
            const analysis::CharPoint pt = analysis::char_from_counts(mc, spectrum, beta);
            t.rows.push_back({fmt17(a2), fmt17(c1), fmt17(pt.value), fmt17(pt.std_error)});
        }
    }
    write_table(t, env.out / ("fig1." + env.format), env.format);
}

protocol::MonteCarloResult fig2_style_run(const Spin1System& sys, const RecipeEnv& env,
                                          protocol::JointOutcomeDistribution* exact_out) {
    const model::InitialState state({0.8, 0.01, 0.19});
    protocol::MonteCarloRun run;
    run.waiting_time = protocol::WaitingTimeSpec::fixed(1.0);
    run.measurements = 20;
    run.realizations = 300000;
    run.master_seed = env.seed;
    run.workers = env.workers;
    if (exact_out) {
        const protocol::MeasurementChain chain =
            protocol::build_chain(sys.h, sys.observable, std::vector<double>(20, 1.0));
        *exact_out = protocol::exact_joint(state, chain);
    }
    return protocol::run_monte_carlo(state, sys.h, sys.observable, run);
}

void recipe_fig2(const RecipeEnv& env) {
    const Spin1System sys = spin1_system(1.0, 0.5, false);
    protocol::JointOutcomeDistribution exact;
    const protocol::MonteCarloResult mc = fig2_style_run(sys, env, &exact);

    const double r = static_cast<double>(mc.realizations);
    Table marg;
    marg.columns = {"level", "E", "initial_exact", "initial_freq", "final_freq", "final_exact"};
    for (std::size_t k = 0; k < 3; ++k) {
        double init_freq = 0.0, final_freq = 0.0, final_exact = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            init_freq += static_cast<double>(mc.counts[j][k]) / r;
            final_freq += static_cast<double>(mc.counts[k][j]) / r;
            final_exact += exact.p(k, j);
        }
        const double c0[3] = {0.8, 0.01, 0.19};
        marg.rows.push_back({std::to_string(k + 1), fmt17(sys.spectrum.level(k)), fmt17(c0[k]),
                             fmt17(init_freq), fmt17(final_freq), fmt17(final_exact)});
    }
    write_table(marg, env.out / ("fig2_marginals." + env.format), env.format);
    write_table(joint_table(mc.joint, sys.spectrum, mc.realizations),
                env.out / ("fig2_joint_mc." + env.format), env.format);
}

void recipe_fig3(const RecipeEnv& env, bool z_squared) {
    const Spin1System sys = spin1_system(1.0, 0.5, z_squared);
    const protocol::MonteCarloResult mc = fig2_style_run(sys, env, nullptr);
    const model::InitialState state({0.8, 0.01, 0.19});
    const model::AlphaBeta ab = model::populations_to_alphabeta(state, sys.spectrum);

    Table t;
    t.columns = {"epsilon", "G_mc", "std_error", "G_closed_form"};
    for (double eps : eps_grid(-2.0, 2.0, 41)) {
        const analysis::CharPoint pt = analysis::char_from_counts(mc, sys.spectrum, eps);
        t.rows.push_back({fmt17(eps), fmt17(pt.value), fmt17(pt.std_error),
                          fmt17(analysis::char_asymptotic(ab, sys.spectrum, eps))});
    }
    const std::string stem = z_squared ? "fig3b" : "fig3a";
    write_table(t, env.out / (stem + "." + env.format), env.format);
}

model::EnergySpectrum figure_levels(char letter) {
    switch (letter) {
        case 'a': return model::EnergySpectrum({-1.0, 0.0, 3.0});
        case 'b': return model::EnergySpectrum({-1.0, 0.0, 1.0});
        case 'c': return model::EnergySpectrum({-3.0, 0.0, 1.0});
    }
    throw ConfigError("unknown figure panel");
}

void append_beta_eff_row(Table& t, std::vector<std::string> prefix,
                         const std::function<double(double)>& g) {
    try {
        const analysis::BetaEffResult r = analysis::beta_eff(g);
        prefix.push_back(fmt17(r.value));
        prefix.push_back(fmt17(r.residual));
        prefix.push_back(r.degenerate ? "1" : "0");
        prefix.push_back("ok");
    } catch (const std::exception& e) {
        prefix.push_back("nan");
        prefix.push_back("nan");
        prefix.push_back("0");
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), ',', ';');
        prefix.push_back(msg);
    }
    t.rows.push_back(std::move(prefix));
}

void recipe_fig4(const RecipeEnv& env, char letter) {
    const model::EnergySpectrum e = figure_levels(letter);
    for (double beta : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5}) {
        Table t;
        t.columns = {"alpha", "beta_eff", "residual", "degenerate", "flag"};
        for (int i = 0; i <= 240; ++i) {
            const double alpha = -30.0 + 0.25 * static_cast<double>(i);
            append_beta_eff_row(t, {fmt17(alpha)}, [&](double eps) {
                return analysis::char_asymptotic({alpha, beta}, e, eps);
            });
        }
        write_table(t, env.out / (std::string("fig4") + letter + "_beta" + trim_number(beta) +
                                  "." + env.format),
                    env.format);
    }
}

void recipe_fig5a(const RecipeEnv& env) {
    Table t;
    t.columns = {"E3", "beta_bar", "beta_eff_alpha20", "lower_bound", "upper_bound"};
    for (int i = 2; i <= 100; ++i) {
        const double e3 = 0.1 * static_cast<double>(i);
        const model::EnergySpectrum e({-1.0, 0.0, e3});
        const double bb = analysis::beta_bar_asymptotic(e);
        double beff = 0.0;
        try {
            const analysis::BetaEffResult r = analysis::beta_eff(
                [&](double eps) { return analysis::char_asymptotic({20.0, 1.0}, e, eps); });
            beff = r.value;
        } catch (const std::exception&) {
            beff = std::nan("");
        }
        t.rows.push_back({fmt17(e3), fmt17(bb), fmt17(beff), fmt17(-std::log(2.0) / e3),
                          fmt17(std::log(2.0))});
    }
    write_table(t, env.out / ("fig5a." + env.format), env.format);
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void recipe_fig5b(const RecipeEnv& env) {
    Table t;
    t.columns = {"E3", "slope_fit", "slope_formula_r", "r_times_v", "slope_fit_times_v"};
    for (int i = 1; i <= 50; ++i) {
        const double e3 = 0.2 * static_cast<double>(i);
        const model::EnergySpectrum e({-1.0, 0.0, e3});
        std::vector<double> alphas, beffs;
        for (double alpha = -30.0; alpha <= -20.0 + 1e-9; alpha += 0.5) {
            try {
                const analysis::BetaEffResult r = analysis::beta_eff(
                    [&](double eps) { return analysis::char_asymptotic({alpha, 1.0}, e, eps); });
                alphas.push_back(alpha);
                beffs.push_back(r.value);
            } catch (const std::exception&) {
            }
        }
        const double slope = alphas.size() >= 2 ? fit_slope(alphas, beffs) : std::nan("");
        t.rows.push_back({fmt17(e3), fmt17(slope), fmt17(analysis::slope_r(e)),
                          fmt17(analysis::slope_r(e) * e.v()), fmt17(slope * e.v())});
    }
    write_table(t, env.out / ("fig5b." + env.format), env.format);
}

void recipe_fig6(const RecipeEnv& env, char letter) {
    const model::EnergySpectrum e = figure_levels(letter);
    Table t;
    t.columns = {"q", "pair", "beta_eff", "residual", "degenerate", "flag"};
    const std::pair<model::EdgePair, const char*> pairs[] = {
        {model::EdgePair::P12, "12"}, {model::EdgePair::P13, "13"}, {model::EdgePair::P23, "23"}};
    for (const auto& [pair, name] : pairs) {
        for (int i = 0; i <= 100; ++i) {
            const double q = static_cast<double>(i) / 100.0;
            const protocol::JointOutcomeDistribution joint =
                analysis::uniform_limit_joint(model::edge_state(q, pair));
            append_beta_eff_row(t, {fmt17(q), name}, [&](double eps) {
                return analysis::char_from_joint(joint, e, eps);
            });
        }
    }
    write_table(t, env.out / (std::string("fig6") + letter + "." + env.format), env.format);
}

} // namespace

bool is_known_figure(const std::string& id) {
    static const char* ids[] = {"fig1",  "fig2",  "fig3a", "fig3b", "fig4a", "fig4b",
                                "fig4c", "fig5a", "fig5b", "fig6a", "fig6b", "fig6c"};
    return std::find_if(std::begin(ids), std::end(ids),
                        [&](const char* s) { return id == s; }) != std::end(ids);
}

void reproduce_figure(const std::string& id, const fs::path& out_dir, const GlobalOptions& opts) {
    if (!is_known_figure(id)) throw ConfigError("unknown figure id '" + id + "'");
    RecipeEnv env;
    env.out = out_dir;
    if (opts.seed) env.seed = *opts.seed;
    if (opts.workers) env.workers = *opts.workers;
    if (opts.format) env.format = *opts.format;
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    if (id == "fig1") recipe_fig1(env);
    else if (id == "fig2") recipe_fig2(env);
    else if (id == "fig3a") recipe_fig3(env, false);
    else if (id == "fig3b") recipe_fig3(env, true);
    else if (id == "fig4a" || id == "fig4b" || id == "fig4c") recipe_fig4(env, id.back());
    else if (id == "fig5a") recipe_fig5a(env);
    else if (id == "fig5b") recipe_fig5b(env);
    else recipe_fig6(env, id.back());
}

// ----------------------------------------------------------------------- scan

void run_scan(const json& spec, const GlobalOptions& opts) {
    const std::string variable = require_key(spec, "variable", "scan.").get<std::string>();
    static const char* kVars[] = {"alpha", "beta", "q", "E3", "tau", "M"};
    if (std::find_if(std::begin(kVars), std::end(kVars),
                     [&](const char* v) { return variable == v; }) == std::end(kVars))
        throw ConfigError("scan: variable must be one of alpha, beta, q, E3, tau, M");

    const double lo = as_number(require_key(spec, "min", "scan."), "min");
    const double hi = as_number(require_key(spec, "max", "scan."), "max");
    const double step = as_number(require_key(spec, "step", "scan."), "step");
    if (!(step > 0.0) || !(hi >= lo)) throw ConfigError("scan: need step > 0 and max >= min");

    const std::string evaluator =
        spec.contains("evaluator") ? spec["evaluator"].get<std::string>() : "closed-form";
    if (evaluator != "closed-form" && evaluator != "exact")
        throw ConfigError("scan: evaluator must be closed-form or exact");
    const bool exact = evaluator == "exact";
    if ((variable == "tau" || variable == "M") && !exact)
        throw ConfigError("scan: variable '" + variable + "' requires the exact evaluator");
    if (variable == "E3" && exact)
        throw ConfigError("scan: variable E3 supports the closed-form evaluator only");

    const double alpha0 = spec.contains("alpha") ? as_number(spec["alpha"], "scan.alpha") : 0.0;
    const double beta0 = spec.contains("beta") ? as_number(spec["beta"], "scan.beta") : 0.0;
    const double q0 = spec.contains("q") ? as_number(spec["q"], "scan.q") : 0.5;
    const std::string pair0 = spec.contains("pair") ? spec["pair"].get<std::string>() : "12";
    double tau0 = spec.contains("tau") ? as_number(spec["tau"], "scan.tau") : 1.0;
    std::size_t m0 = spec.contains("measurements")
                         ? spec["measurements"].get<std::size_t>()
                         : 20;

    // Closed form runs off a bare level set; the exact engine needs the system.
    std::optional<model::EnergySpectrum> levels;
    std::optional<Spin1System> sys;
    if (exact) {
        json sys_json;
        sys_json["system"] = spec.contains("system")
                                 ? spec["system"]
                                 : json{{"name", "w1*Sz + w2*Sx"}, {"w1", 1.0}, {"w2", 0.5}};
        if (spec.contains("observable")) sys_json["observable"] = spec["observable"];
        sys_json["initial_state"] = json{{"thermal_beta", 0.0}}; // placeholder for parsing
        const ExperimentConfig probe = parse_config(sys_json);
        const BuiltSystem built = build_system(probe);
        sys = Spin1System{built.h, built.spectrum, built.observable};
        levels = built.spectrum;
    } else if (variable != "E3") {
        if (!spec.contains("levels")) throw ConfigError("scan: missing key 'scan.levels'");
        levels = model::EnergySpectrum(spec["levels"].get<std::vector<double>>());
    }

    Table t;
    t.columns = {"variable", "value",  "alpha",    "beta", "q",
                 "pair",     "E1",     "E2",       "E3",   "tau",
                 "measurements", "beta_eff", "residual", "degenerate", "flag"};

    const int npts = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (int i = 0; i < npts; ++i) {
        const double x = lo + step * static_cast<double>(i);
        double alpha = alpha0, beta = beta0, q = q0, tau = tau0;
        std::size_t m = m0;
        model::EnergySpectrum e = levels ? *levels
                                         : model::EnergySpectrum({-1.0, 0.0, 1.0});
        std::string flag = "ok";
        std::function<double(double)> g;
        try {
            if (variable == "alpha") alpha = x;
            else if (variable == "beta") beta = x;
            else if (variable == "q") q = x;
            else if (variable == "E3") e = model::EnergySpectrum({-1.0, 0.0, x});
            else if (variable == "tau") tau = x;
            else m = static_cast<std::size_t>(std::llround(x));

            // Initial state: edge q when a pair is given, otherwise (alpha, beta).
            const bool use_edge = spec.contains("pair") || variable == "q";
            model::InitialState state =
                use_edge ? model::edge_state(q, model::edge_pair_from_string(pair0))
                         : model::alphabeta_to_populations({alpha, beta}, e);

            if (exact) {
                const protocol::MeasurementChain chain = protocol::build_chain(
                    sys->h, sys->observable, std::vector<double>(m, tau));
                const protocol::JointOutcomeDistribution joint =
                    protocol::exact_joint(state, chain);
                const model::EnergySpectrum& se = sys->spectrum;
                g = [joint, se](double eps) {
                    return analysis::char_from_joint(joint, se, eps);
                };
            } else if (use_edge) {
                const protocol::JointOutcomeDistribution joint =
                    analysis::uniform_limit_joint(state);
                g = [joint, e](double eps) { return analysis::char_from_joint(joint, e, eps); };
            } else {
                const model::AlphaBeta ab{alpha, beta};
                g = [ab, e](double eps) { return analysis::char_asymptotic(ab, e, eps); };
            }
        } catch (const std::exception& ex) {
            flag = ex.what();
            std::replace(flag.begin(), flag.end(), ',', ';');
        }

        std::vector<std::string> row = {variable,
                                        fmt17(x),
                                        fmt17(alpha),
                                        fmt17(beta),
                                        fmt17(q),
                                        pair0,
                                        fmt17(e.level(0)),
                                        fmt17(e.level(1)),
                                        fmt17(e.size() == 3 ? e.level(2) : std::nan("")),
                                        fmt17(tau),
                                        std::to_string(m)};
        if (flag != "ok" || !g) {
            row.insert(row.end(), {"nan", "nan", "0", flag == "ok" ? "error" : flag});
            t.rows.push_back(std::move(row));
        } else {
            append_beta_eff_row(t, std::move(row), g);
        }
    }

    const std::string format = opts.format.value_or("csv");
    const fs::path out = spec.contains("output") ? fs::path(spec["output"].get<std::string>())
                                                 : fs::path("scan." + format);
    write_table(t, out, format);
}

} // namespace qheat::app
