// Config-driven experiment harness behind the CLI: JSON configuration,
// dataset emission (CSV/JSON), figure-reproduction recipes and beta_eff scans.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qheat/analysis.hpp"
#include "qheat/linalg.hpp"
#include "qheat/model.hpp"
#include "qheat/protocol.hpp"

namespace qheat::app {

inline constexpr const char* kVersion = "0.1.0";

// exit code 2
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// exit code 4
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> format; // "csv" | "json"
    bool quiet = false;
};

struct ExperimentConfig {
    nlohmann::json raw;

    linalg::CMatrix h_lab;
    linalg::CMatrix o_lab;

    enum class StateKind { Populations, AlphaBeta, Thermal, Edge };
    StateKind state_kind = StateKind::Thermal;
    std::vector<double> populations;
    model::AlphaBeta ab;
    double thermal_beta = 0.0;
    double edge_q = 0.0;
    model::EdgePair edge_pair = model::EdgePair::P12;

    std::size_t measurements = 20;
    protocol::WaitingTimeSpec waiting_time = protocol::WaitingTimeSpec::fixed(1.0);
    bool evolve_before_first = true;

    enum class Mode { Exact, MonteCarlo, Both };
    Mode mode = Mode::Exact;
    std::uint64_t realizations = 300000;
    std::uint64_t master_seed = 12345;
    unsigned workers = 0; // 0 = hardware concurrency

    std::filesystem::path out_dir = ".";
    std::string prefix = "run";
    std::string format = "csv";
    double eps_min = -2.0;
    double eps_max = 2.0;
    int eps_points = 41;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
void apply_overrides(ExperimentConfig& cfg, const GlobalOptions& opts);

struct BuiltSystem {
    linalg::EigenSystem h;
    model::EnergySpectrum spectrum;
    model::Observable observable;
};

BuiltSystem build_system(const ExperimentConfig& cfg);
model::InitialState resolve_initial_state(const ExperimentConfig& cfg,
                                          const model::EnergySpectrum& e);

// Runs the experiment, writes the joint / characteristic / summary outputs and
// returns the summary document.
nlohmann::json run_experiment(const ExperimentConfig& cfg);

// Known ids: fig1 fig2 fig3a fig3b fig4a fig4b fig4c fig5a fig5b fig6a fig6b fig6c
bool is_known_figure(const std::string& id);
void reproduce_figure(const std::string& id, const std::filesystem::path& out_dir,
                      const GlobalOptions& opts);

void run_scan(const nlohmann::json& spec, const GlobalOptions& opts);

// ---- dataset plumbing (shared with tests) ----

std::string fmt17(double x); // 17 significant digits, round-trip safe

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

std::string render_csv(const Table& t);
std::string render_json(const Table& t);
void write_table(const Table& t, const std::filesystem::path& path, const std::string& format);

// write-temp-then-rename
void atomic_write(const std::filesystem::path& path, const std::string& content);

std::uint64_t fnv1a64(const std::string& s);

} // namespace qheat::app
