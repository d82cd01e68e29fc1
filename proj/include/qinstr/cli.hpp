#pragma once

// Batch front door. A run is described by one JSON config (or equivalent
// command-line flags merged into it); parse_config validates the whole
// document and reports every violation at once, run dispatches and writes
// the report files.

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "qinstr/io.hpp"
#include "qinstr/simulate.hpp"

namespace qinstr::cli {

struct GridConfig {
    int nodes = 64;
    double x_max = 40.0;
};

struct ModelConfig {
    std::string model; // photon_counting | quantum_counter | custom
    double lambda_t = 0.0;
    int cutoff = -1;
    int m_max = -1;
    std::optional<GridConfig> grid;
    std::string instrument_path; // custom only
};

struct RunConfig {
    std::string command;
    std::optional<ModelConfig> model;
    int n = 1;                  // composition depth (compose, infinite-approx, witness)
    int k = 1;                  // trajectory length (simulate)
    std::int64_t n_traj = 1;
    double tol = 1e-8;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    bool expect_conserved = false;
    Statistic statistic = Statistic::Mk;
    std::string povm_path;  // conserve/witness override, povm-order first operand
    std::string povm2_path; // povm-order second operand
    std::optional<Json> rho0;                             // matrix literal or file path
    std::optional<std::map<std::int64_t, double>> reference; // TV reference law (Mk)
};

// Throws ParseError on malformed JSON, ValidationError listing every
// violation otherwise.
RunConfig parse_config(const std::string& text);

// Returns the process exit status: 0 success, 1 domain failure (for
// example not conserved while expect_conserved is set).
int run(const RunConfig& config);

} // namespace qinstr::cli
