#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qinstr/cli.hpp"
#include "qinstr/errors.hpp"

// Thin argv layer: flags overlay the JSON config (flags win), then the
// merged document goes through the same parse_config as file-only runs.

int main(int argc, char** argv) {
    CLI::App app{"quantum instrument and POVM toolkit"};
    app.require_subcommand(0, 1);

    std::string config_path;
    std::string out_dir;
    std::string statistic;
    std::string povm;
    std::string povm2;
    std::string rho0;
    std::string model_name;
    std::string instrument_path;
    double tol = 0;
    double lambda_t = 0;
    double grid_xmax = 0;
    std::uint64_t seed = 0;
    std::int64_t n_traj = 0;
    int n = 0;
    int k = 0;
    int cutoff = 0;
    int m_max = 0;
    int grid_nodes = 0;
    bool expect_conserved = false;

    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--tol", tol, "decision tolerance");
    app.add_option("--seed", seed, "RNG master seed");
    app.add_flag("--expect-conserved", expect_conserved, "exit 1 unless conserve reports conserved");
    app.add_option("--n", n, "composition depth");
    app.add_option("--k", k, "trajectory length");
    app.add_option("--n-traj", n_traj, "number of trajectories");
    app.add_option("--statistic", statistic, "Mk or Xk");
    app.add_option("--povm", povm, "POVM file");
    app.add_option("--povm2", povm2, "second POVM file (povm-order)");
    app.add_option("--rho0", rho0, "initial state file (matrix literal JSON)");
    app.add_option("--model", model_name, "photon_counting | quantum_counter | custom");
    app.add_option("--lambda-t", lambda_t, "rate-time product of the model");
    app.add_option("--cutoff", cutoff, "Fock cutoff of the model");
    app.add_option("--m-max", m_max, "largest explicit count outcome (quantum_counter)");
    app.add_option("--grid-nodes", grid_nodes, "quadrature node count");
    app.add_option("--grid-xmax", grid_xmax, "quadrature interval upper end");
    app.add_option("--instrument", instrument_path, "instrument file (custom model)");

    for (const char* name :
         {"validate", "compose", "povm-order", "conserve", "infinite-approx", "witness", "simulate"}) {
        app.add_subcommand(name)->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        qinstr::Json merged = qinstr::Json::object();
        if (!config_path.empty()) {
            merged = qinstr::read_json_file(config_path);
            if (!merged.is_object()) {
                std::cerr << config_path << ": expected a JSON object\n";
                return 2;
            }
        }
        if (!app.get_subcommands().empty()) {
            merged["command"] = app.get_subcommands()[0]->get_name();
        }
        if (app.count("--out") != 0u) merged["out"] = out_dir;
        if (app.count("--tol") != 0u) merged["tol"] = tol;
        if (app.count("--seed") != 0u) merged["seed"] = seed;
        if (expect_conserved) merged["expect_conserved"] = true;
        if (app.count("--n") != 0u) merged["n"] = n;
        if (app.count("--k") != 0u) merged["k"] = k;
        if (app.count("--n-traj") != 0u) merged["n_traj"] = n_traj;
        if (app.count("--statistic") != 0u) merged["statistic"] = statistic;
        if (app.count("--povm") != 0u) merged["povm"] = povm;
        if (app.count("--povm2") != 0u) merged["povm2"] = povm2;
        if (app.count("--rho0") != 0u) merged["rho0"] = rho0;

        auto model_set = [&merged](const char* key, const qinstr::Json& value) {
            if (!merged.contains("model") || !merged["model"].is_object()) {
                merged["model"] = qinstr::Json::object();
            }
            merged["model"][key] = value;
        };
        if (app.count("--model") != 0u) model_set("model", model_name);
        if (app.count("--lambda-t") != 0u) model_set("lambda_t", lambda_t);
        if (app.count("--cutoff") != 0u) model_set("cutoff", cutoff);
        if (app.count("--m-max") != 0u) model_set("m_max", m_max);
        if (app.count("--instrument") != 0u) model_set("instrument", instrument_path);
        if (app.count("--grid-nodes") != 0u || app.count("--grid-xmax") != 0u) {
            qinstr::Json grid = merged.contains("model") && merged["model"].contains("grid")
                                    ? merged["model"]["grid"]
                                    : qinstr::Json::object();
            if (app.count("--grid-nodes") != 0u) grid["nodes"] = grid_nodes;
            if (app.count("--grid-xmax") != 0u) grid["x_max"] = grid_xmax;
            model_set("grid", grid);
        }

        const qinstr::cli::RunConfig cfg = qinstr::cli::parse_config(merged.dump());
        return qinstr::cli::run(cfg);
    } catch (const qinstr::ParseError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const qinstr::ValidationError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
}
