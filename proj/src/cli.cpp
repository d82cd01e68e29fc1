#include "qinstr/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qinstr/conservation.hpp"
#include "qinstr/models.hpp"

namespace qinstr::cli {
namespace {

namespace fs = std::filesystem;

std::string fmt17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where,
                    std::vector<std::string>& bad) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            bad.push_back(where + ": unknown key \"" + it.key() + "\"");
        }
    }
}

bool get_positive_int(const Json& j, const char* key, int min_value, const std::string& where,
                      std::vector<std::string>& bad, int& out) {
    const Json& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < min_value ||
        v.get<std::int64_t>() > std::numeric_limits<int>::max()) {
        bad.push_back(where + "." + key + ": expected an integer >= " + std::to_string(min_value));
        return false;
    }
    out = static_cast<int>(v.get<std::int64_t>());
    return true;
}

void check_file(const std::string& path, const std::string& what, std::vector<std::string>& bad) {
    if (!fs::exists(path)) bad.push_back(what + ": file does not exist: " + path);
}

std::optional<ModelConfig> parse_model(const Json& m, std::vector<std::string>& bad) {
    if (!m.is_object()) {
        bad.push_back("model: expected an object");
        return std::nullopt;
    }
    reject_unknown(m, {"model", "lambda_t", "cutoff", "m_max", "grid", "instrument"}, "model", bad);
    ModelConfig mc;
    if (!m.contains("model") || !m.at("model").is_string()) {
        bad.push_back("model.model: required, one of photon_counting|quantum_counter|custom");
        return std::nullopt;
    }
    mc.model = m.at("model").get<std::string>();
    const bool builtin = mc.model == "photon_counting" || mc.model == "quantum_counter";
    if (!builtin && mc.model != "custom") {
        bad.push_back("model.model: must be photon_counting, quantum_counter or custom");
        return std::nullopt;
    }

    if (m.contains("lambda_t")) {
        if (!m.at("lambda_t").is_number() || !(m.at("lambda_t").get<double>() > 0)) {
            bad.push_back("model.lambda_t: expected a positive real");
        } else {
            mc.lambda_t = m.at("lambda_t").get<double>();
        }
    } else if (builtin) {
        bad.push_back("model.lambda_t: required for " + mc.model);
    }

    if (m.contains("cutoff")) {
        get_positive_int(m, "cutoff", 0, "model", bad, mc.cutoff);
    } else if (builtin) {
        bad.push_back("model.cutoff: required for " + mc.model);
    }

    if (m.contains("m_max")) {
        if (mc.model != "quantum_counter") {
            bad.push_back("model.m_max: only valid for quantum_counter");
        } else {
            get_positive_int(m, "m_max", 0, "model", bad, mc.m_max);
        }
    } else if (mc.model == "quantum_counter") {
        bad.push_back("model.m_max: required for quantum_counter");
    }

    if (m.contains("grid")) {
        if (mc.model != "quantum_counter") {
            bad.push_back("model.grid: only valid for quantum_counter");
        } else if (!m.at("grid").is_object()) {
            bad.push_back("model.grid: expected an object {nodes, x_max}");
        } else {
            const Json& g = m.at("grid");
            reject_unknown(g, {"nodes", "x_max"}, "model.grid", bad);
            GridConfig gc;
            if (g.contains("nodes")) get_positive_int(g, "nodes", 2, "model.grid", bad, gc.nodes);
            if (g.contains("x_max")) {
                if (!g.at("x_max").is_number() || !(g.at("x_max").get<double>() > 0)) {
                    bad.push_back("model.grid.x_max: expected a positive real");
                } else {
                    gc.x_max = g.at("x_max").get<double>();
                }
            }
            mc.grid = gc;
        }
    }

    if (m.contains("instrument")) {
        if (mc.model != "custom") {
            bad.push_back("model.instrument: only valid for custom");
        } else if (!m.at("instrument").is_string()) {
            bad.push_back("model.instrument: expected a file path string");
        } else {
            mc.instrument_path = m.at("instrument").get<std::string>();
            check_file(mc.instrument_path, "model.instrument", bad);
        }
    } else if (mc.model == "custom") {
        bad.push_back("model.instrument: required for custom");
    }
    return mc;
}

struct Built {
    Instrument<double> ins;
    std::optional<Povm<double>> natural; // the model's own observable, if any
    double lambda_t = 0;
};

Built build_model(const ModelConfig& mc) {
    if (mc.model == "photon_counting") {
        return {photon_counting_instrument(mc.lambda_t, mc.cutoff), number_povm(mc.cutoff), mc.lambda_t};
    }
    if (mc.model == "quantum_counter") {
        // The intensity observable lives on the full Fock block so it shares
        // the instrument's dimension; the default grid span follows the
        // physical cutoff, where the initial states live.
        const QuadratureGrid grid =
            mc.grid ? gauss_legendre(mc.grid->nodes, 0.0, mc.grid->x_max) : default_x_grid(mc.cutoff);
        return {quantum_counter_instrument(mc.lambda_t, mc.cutoff, mc.m_max),
                x_povm(mc.cutoff + mc.m_max, grid), mc.lambda_t};
    }
    return {instrument_from_json(read_json_file(mc.instrument_path)), std::nullopt, mc.lambda_t};
}

Povm<double> resolve_povm(const RunConfig& cfg, const Built& built) {
    if (!cfg.povm_path.empty()) return povm_from_json(read_json_file(cfg.povm_path));
    if (built.natural) return *built.natural;
    throw ValidationError("command " + cfg.command + ": a custom model needs an explicit povm file");
}

DensityState<double> resolve_rho0(const Json& given, Eigen::Index dim) {
    const Json literal = given.is_string() ? read_json_file(given.get<std::string>()) : given;
    MatrixC<double> rho = matrix_from_json(literal);
    if (rho.rows() != dim) {
        throw ValidationError("rho0: dimension " + std::to_string(rho.rows()) +
                              " does not match the instrument dimension " + std::to_string(dim));
    }
    return DensityState<double>(std::move(rho));
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.out_dir);
    return (fs::path(cfg.out_dir) / name).string();
}

int run_validate(const RunConfig& cfg) {
    const Built built = build_model(*cfg.model);
    const double residual = instrument_normalization_residual(built.ins);
    Json report;
    report["model"] = cfg.model->model;
    report["dim"] = built.ins.dim;
    report["outcomes"] = built.ins.space.size();
    report["normalization_residual"] = residual;
    bool ok = residual <= cfg.tol;
    if (built.natural) {
        Json violations = Json::array();
        for (const PovmViolation& v : validate_povm(*built.natural, cfg.tol)) {
            violations.push_back({{"kind", v.kind}, {"index", v.index}, {"magnitude", v.magnitude}});
            ok = false;
        }
        report["povm_violations"] = std::move(violations);
    }
    report["valid"] = ok;
    write_json_file(out_path(cfg, "validate.json"), report);
    return ok ? 0 : 1;
}

int run_compose(const RunConfig& cfg) {
    const Built built = build_model(*cfg.model);
    const Instrument<double> composed = n_fold(built.ins, cfg.n);
    write_json_file(out_path(cfg, "composed_instrument.json"), instrument_to_json(composed));
    write_json_file(out_path(cfg, "composed_povm.json"), povm_to_json(induced_povm(composed)));
    return 0;
}

int run_povm_order(const RunConfig& cfg) {
    const Povm<double> e1 = povm_from_json(read_json_file(cfg.povm_path));
    const Povm<double> e2 = povm_from_json(read_json_file(cfg.povm2_path));
    const EquivalenceResult<double> eq = check_equivalent(e1, e2, cfg.tol);
    Json report;
    report["forward"] = certificate_to_json(eq.cert12);
    report["backward"] = certificate_to_json(eq.cert21);
    report["equivalent"] = eq.equivalent;
    write_json_file(out_path(cfg, "order.json"), report);
    return 0;
}

int run_conserve(const RunConfig& cfg) {
    const Built built = build_model(*cfg.model);
    const Povm<double> e = resolve_povm(cfg, built);
    const ConservationReport<double> report = conservation_check(built.ins, e, cfg.tol);
    write_json_file(out_path(cfg, "conserve.json"), conservation_to_json(report));
    return cfg.expect_conserved && !report.conserved ? 1 : 0;
}

int run_infinite_approx(const RunConfig& cfg) {
    const Built built = build_model(*cfg.model);
    std::vector<Povm<double>> approx;
    approx.reserve(static_cast<std::size_t>(cfg.n));
    for (int i = 1; i <= cfg.n; ++i) {
        approx.push_back(finite_composition(built.ins, i));
        write_json_file(out_path(cfg, "approx_" + std::to_string(i) + ".json"),
                        povm_to_json(approx.back()));
    }
    std::ofstream csv(out_path(cfg, "consistency.csv"));
    csv << "n,residual\n";
    for (int i = 1; i < cfg.n; ++i) {
        csv << i << ','
            << fmt17(kolmogorov_consistency(approx[static_cast<std::size_t>(i - 1)],
                                            approx[static_cast<std::size_t>(i)]))
            << '\n';
    }
    return 0;
}

int run_witness(const RunConfig& cfg) {
    const Built built = build_model(*cfg.model);
    const Povm<double> f = resolve_povm(cfg, built);
    WitnessOptions opts;
    opts.preorder.lp.feas_tol = std::min(opts.preorder.lp.feas_tol, cfg.tol);
    const WitnessChain<double> chain = minimality_witness(built.ins, f, cfg.n, cfg.tol, opts);
    Json levels = Json::array();
    for (int i = 0; i < chain.depth; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        levels.push_back({{"k", i + 1},
                          {"residual", chain.residuals[idx]},
                          {"marginal_residual", chain.marginal_residuals[idx]},
                          {"tilde", kernel_to_json(chain.tilde[idx])},
                          {"marginal", kernel_to_json(chain.marginals[idx])}});
    }
    Json report;
    report["depth"] = chain.depth;
    report["levels"] = std::move(levels);
    write_json_file(out_path(cfg, "witness.json"), report);
    return 0;
}

int run_simulate(const RunConfig& cfg) {
    const Built built = build_model(*cfg.model);
    const DensityState<double> rho0 = resolve_rho0(*cfg.rho0, built.ins.dim);
    const std::uint64_t seed = *cfg.seed;

    std::ofstream csv(out_path(cfg, "trajectories.csv"));
    csv << "index,step,outcome,prob\n";
    for (std::int64_t i = 0; i < cfg.n_traj; ++i) {
        const Trajectory<double> traj =
            sample_trajectory(built.ins, rho0, cfg.k, derive_seed(seed, static_cast<std::uint64_t>(i)));
        for (int step = 0; step < cfg.k; ++step) {
            const auto s = static_cast<std::size_t>(step);
            csv << i << ',' << step + 1 << ',' << csv_field(to_string(traj.outcomes[s])) << ','
                << fmt17(traj.probs[s]) << '\n';
        }
    }

    const ConvergenceStats stats = ensemble_stats(built.ins, rho0, cfg.k, cfg.n_traj, seed,
                                                  cfg.statistic, built.lambda_t);
    Json sj;
    sj["statistic"] = cfg.statistic == Statistic::Mk ? "Mk" : "Xk";
    sj["k"] = stats.k;
    sj["n_traj"] = stats.n_traj;
    sj["mean"] = stats.mean;
    sj["variance"] = stats.variance;
    if (cfg.reference) {
        Json ref = Json::object();
        for (const auto& [value, prob] : *cfg.reference) ref[std::to_string(value)] = prob;
        sj["reference"] = std::move(ref);
        if (cfg.statistic == Statistic::Mk) {
            sj["tv_distance"] = tv_distance(stats.empirical, *cfg.reference);
        }
    }
    write_json_file(out_path(cfg, "stats.json"), sj);

    std::ofstream dat(out_path(cfg, "histogram.dat"));
    dat << "# value count frequency\n";
    if (cfg.statistic == Statistic::Mk) {
        for (const auto& [value, freq] : stats.empirical) {
            dat << value << ' ' << std::llround(freq * static_cast<double>(stats.n_traj)) << ' '
                << fmt17(freq) << '\n';
        }
    } else {
        const auto [lo_it, hi_it] = std::minmax_element(stats.values.begin(), stats.values.end());
        const double lo = *lo_it;
        const double width = std::max((*hi_it - lo) / 50.0, 1e-300);
        std::vector<std::int64_t> bins(50, 0);
        for (double v : stats.values) {
            const auto b = std::min<std::int64_t>(static_cast<std::int64_t>((v - lo) / width), 49);
            ++bins[static_cast<std::size_t>(b)];
        }
        for (std::size_t b = 0; b < bins.size(); ++b) {
            dat << fmt17(lo + (static_cast<double>(b) + 0.5) * width) << ' ' << bins[b] << ' '
                << fmt17(static_cast<double>(bins[b]) / static_cast<double>(stats.n_traj)) << '\n';
        }
    }
    return 0;
}

} // namespace

RunConfig parse_config(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("config: expected a JSON object");

    std::vector<std::string> bad;
    RunConfig cfg;
    reject_unknown(j,
                   {"command", "model", "n", "k", "n_traj", "tol", "seed", "out", "expect_conserved",
                    "statistic", "povm", "povm2", "rho0", "reference"},
                   "config", bad);

    static const std::set<std::string> kCommands = {
        "validate", "compose", "povm-order", "conserve", "infinite-approx", "witness", "simulate"};
    if (j.contains("command") && j.at("command").is_string() &&
        kCommands.count(j.at("command").get<std::string>())) {
        cfg.command = j.at("command").get<std::string>();
    } else {
        bad.push_back(
            "config.command: required, one of "
            "validate|compose|povm-order|conserve|infinite-approx|witness|simulate");
    }

    if (j.contains("model")) cfg.model = parse_model(j.at("model"), bad);

    if (j.contains("n")) get_positive_int(j, "n", 1, "config", bad, cfg.n);
    if (j.contains("k")) get_positive_int(j, "k", 1, "config", bad, cfg.k);
    if (j.contains("n_traj")) {
        if (!j.at("n_traj").is_number_integer() || j.at("n_traj").get<std::int64_t>() < 1) {
            bad.push_back("config.n_traj: expected an integer >= 1");
        } else {
            cfg.n_traj = j.at("n_traj").get<std::int64_t>();
        }
    }
    if (j.contains("tol")) {
        if (!j.at("tol").is_number() || !(j.at("tol").get<double>() > 0)) {
            bad.push_back("config.tol: expected a positive real");
        } else {
            cfg.tol = j.at("tol").get<double>();
        }
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_integer() || j.at("seed").get<std::int64_t>() < 0) {
            bad.push_back("config.seed: expected a nonnegative integer");
        } else {
            cfg.seed = j.at("seed").get<std::uint64_t>();
        }
    }
    if (j.contains("out")) {
        if (!j.at("out").is_string() || j.at("out").get<std::string>().empty()) {
            bad.push_back("config.out: expected a directory path string");
        } else {
            cfg.out_dir = j.at("out").get<std::string>();
        }
    }
    if (j.contains("expect_conserved")) {
        if (!j.at("expect_conserved").is_boolean()) {
            bad.push_back("config.expect_conserved: expected a boolean");
        } else {
            cfg.expect_conserved = j.at("expect_conserved").get<bool>();
        }
    }
    if (j.contains("statistic")) {
        const Json& s = j.at("statistic");
        if (s.is_string() && s.get<std::string>() == "Mk") {
            cfg.statistic = Statistic::Mk;
        } else if (s.is_string() && s.get<std::string>() == "Xk") {
            cfg.statistic = Statistic::Xk;
        } else {
            bad.push_back("config.statistic: expected \"Mk\" or \"Xk\"");
        }
    }
    for (const char* key : {"povm", "povm2"}) {
        if (!j.contains(key)) continue;
        if (!j.at(key).is_string()) {
            bad.push_back(std::string("config.") + key + ": expected a file path string");
            continue;
        }
        const std::string path = j.at(key).get<std::string>();
        check_file(path, std::string("config.") + key, bad);
        (std::string(key) == "povm" ? cfg.povm_path : cfg.povm2_path) = path;
    }
    if (j.contains("rho0")) {
        const Json& r = j.at("rho0");
        if (r.is_string()) {
            check_file(r.get<std::string>(), "config.rho0", bad);
            cfg.rho0 = r;
        } else if (r.is_array()) {
            cfg.rho0 = r;
        } else {
            bad.push_back("config.rho0: expected a matrix literal or a file path string");
        }
    }
    if (j.contains("reference")) {
        const Json& r = j.at("reference");
        if (!r.is_object()) {
            bad.push_back("config.reference: expected an object mapping outcome to probability");
        } else {
            std::map<std::int64_t, double> ref;
            for (auto it = r.begin(); it != r.end(); ++it) {
                std::size_t pos = 0;
                std::int64_t value = 0;
                try {
                    value = std::stoll(it.key(), &pos);
                } catch (const std::exception&) {
                    pos = 0;
                }
                if (pos != it.key().size() || !it.value().is_number() || it.value().get<double>() < 0) {
                    bad.push_back("config.reference: keys must be integers, values nonnegative reals");
                    break;
                }
                ref[value] = it.value().get<double>();
            }
            cfg.reference = std::move(ref);
        }
    }

    if (!cfg.command.empty()) {
        if (cfg.command != "povm-order" && !cfg.model) {
            bad.push_back("config: command " + cfg.command + " requires a model");
        }
        if (cfg.command == "povm-order") {
            if (cfg.povm_path.empty()) bad.push_back("config.povm: required for povm-order");
            if (cfg.povm2_path.empty()) bad.push_back("config.povm2: required for povm-order");
        }
        if ((cfg.command == "conserve" || cfg.command == "witness") && cfg.model &&
            cfg.model->model == "custom" && cfg.povm_path.empty()) {
            bad.push_back("config.povm: required for " + cfg.command + " with a custom model");
        }
        if (cfg.command == "simulate") {
            if (!cfg.seed) bad.push_back("config.seed: simulate requires an explicit seed");
            if (!cfg.rho0) bad.push_back("config.rho0: required for simulate");
            if (cfg.statistic == Statistic::Xk && cfg.model && !(cfg.model->lambda_t > 0)) {
                bad.push_back("config: the Xk statistic needs model.lambda_t for its scale");
            }
        }
    }

    if (!bad.empty()) {
        std::string message = "invalid config:";
        for (const std::string& b : bad) message += "\n  - " + b;
        throw ValidationError(message);
    }
    return cfg;
}

int run(const RunConfig& cfg) {
    if (cfg.command == "validate") return run_validate(cfg);
    if (cfg.command == "compose") return run_compose(cfg);
    if (cfg.command == "povm-order") return run_povm_order(cfg);
    if (cfg.command == "conserve") return run_conserve(cfg);
    if (cfg.command == "infinite-approx") return run_infinite_approx(cfg);
    if (cfg.command == "witness") return run_witness(cfg);
    if (cfg.command == "simulate") return run_simulate(cfg);
    throw ValidationError("run: unknown command " + cfg.command);
}

} // namespace qinstr::cli
