#pragma once

// Command-line front end.
//
//   mvjump validate     --config market.json
//   mvjump solve        --config market.json [--steps N] [--output riccati.csv]
//   mvjump frontier     --config market.json --x0 X --z Z [--z Z ...] [--output frontier.csv]
//   mvjump policy-eval  --config market.json --x0 X --z Z --at T,X [--at T,X ...]
//   mvjump simulate     --config market.json --x0 X [--z Z | --d D] [--n-paths N] [--dt DT]
//                       [--seed S] [--threads K] [--record-paths R] [--paths-output paths.csv]
//   mvjump oracle-check [--config market.json]
//
// Values missing from the command line are taken from the optional "run"
// object of the config file (same names, with underscores). Exit codes:
// 0 success, 1 invalid market or config, 2 numerical failure, 3 usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvjump/mvjump.hpp"

namespace mvjump::cli {

enum ExitCode : int { kOk = 0, kInvalid = 1, kNumeric = 2, kUsage = 3 };

struct RunConfig {
    std::string command;
    std::string config_path;
    std::string output_path;
    std::string paths_output;
    int steps = 2000;
    double tol = kDefaultHamiltonianTol;
    std::size_t n_paths = 100000;
    double dt = 1e-3;
    std::uint64_t seed = 20240601;
    unsigned threads = 1;
    std::size_t record_paths = 0;
    std::vector<double> z;
    double x0 = 0.0;
    std::optional<double> d;
    std::vector<std::string> at;
};

inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

// Fills fields the user did not set on the command line from cfg["run"].
inline void merge_run_section(RunConfig& rc, const nlohmann::json& cfg, const CLI::App& app) {
    if (!cfg.contains("run")) return;
    const auto& r = cfg["run"];
    if (!r.is_object()) throw StructuralError("\"run\" must be an object");
    auto unset = [&](const char* opt) {
        const CLI::Option* o = app.get_option_no_throw(opt);
        return o == nullptr || o->count() == 0;
    };
    if (unset("--steps") && r.contains("steps")) rc.steps = r["steps"].get<int>();
    if (unset("--tol") && r.contains("tol")) rc.tol = r["tol"].get<double>();
    if (unset("--n-paths") && r.contains("n_paths")) rc.n_paths = r["n_paths"].get<std::size_t>();
    if (unset("--dt") && r.contains("dt")) rc.dt = r["dt"].get<double>();
    if (unset("--seed") && r.contains("seed")) rc.seed = r["seed"].get<std::uint64_t>();
    if (unset("--threads") && r.contains("threads")) rc.threads = r["threads"].get<unsigned>();
    if (unset("--record-paths") && r.contains("record_paths"))
        rc.record_paths = r["record_paths"].get<std::size_t>();
    if (unset("--x0") && r.contains("x0")) rc.x0 = r["x0"].get<double>();
    if (unset("--d") && r.contains("d")) rc.d = r["d"].get<double>();
    if (unset("--z") && r.contains("z")) {
        rc.z.clear();
        if (r["z"].is_array())
            for (const auto& v : r["z"]) rc.z.push_back(v.get<double>());
        else
            rc.z.push_back(r["z"].get<double>());
    }
    if (unset("--output") && r.contains("output")) rc.output_path = r["output"].get<std::string>();
    if (unset("--paths-output") && r.contains("paths_output"))
        rc.paths_output = r["paths_output"].get<std::string>();
}

inline void check_numbers(const RunConfig& rc) {
    if (rc.steps < 16) throw UsageError("--steps must be at least 16");
    if (!(rc.tol > 0.0)) throw UsageError("--tol must be positive");
    if (rc.n_paths < 1) throw UsageError("--n-paths must be positive");
    if (!(rc.dt > 0.0)) throw UsageError("--dt must be positive");
    if (rc.threads < 1) throw UsageError("--threads must be positive");
}

// Opens --output, or falls back to `fallback` when no path was given.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
        if (path.empty()) return;
        file_ = std::make_unique<std::ofstream>(path);
        if (!*file_) throw UsageError("cannot open output file " + path);
        os_ = file_.get();
    }
    std::ostream& operator*() { return *os_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* os_;
};

inline void print_report(std::ostream& out, const ValidationReport& rep) {
    out << "check,passed,detail\n";
    for (const auto& c : rep.checks)
        out << c.name << ',' << (c.passed ? "yes" : "no") << ',' << c.detail << '\n';
    for (std::size_t k = 0; k < rep.min_eigenvalues.size(); ++k)
        out << "min_eigenvalue_segment_" << k << ",," << fmt(rep.min_eigenvalues[k]) << '\n';
    out << "valid=" << (rep.valid() ? "true" : "false") << '\n';
}

struct OracleRow {
    std::string name;
    bool passed;
    double error;
    double tolerance;
};

inline std::vector<OracleRow> oracle_suite(const std::optional<MarketModel>& user_model, int steps) {
    std::vector<OracleRow> rows;
    auto add = [&](std::string name, double err, double tol) {
        rows.push_back({std::move(name), err <= tol, err, tol});
    };

    {  // diffusion only
        const auto model = one_asset_model(0.2, 0.3, {});
        const auto sol = solve(model, steps);
        const auto ref = analytic_diffusion_p_minus(model);
        double e = 0.0, ep = 0.0;
        for (std::size_t i = 0; i < sol.grid.size(); ++i) {
            e = std::max(e, std::abs(sol.p_minus[i] - ref(sol.grid[i])));
            ep = std::max(ep, std::abs(sol.p_plus[i] - 1.0));
        }
        add("diffusion_p_minus", e, 1e-6);
        add("diffusion_p_plus_one", ep, 1e-10);
    }
    {  // negative jump
        const ScalarCaseParams p{0.2, 0.3, -0.5, 1.0};
        const auto sol = solve(p.model(), steps);
        const auto cf = case_beta_neg(p);
        double ev = 0.0, ep = 0.0, em = 0.0;
        for (std::size_t i = 0; i < sol.grid.size(); ++i) {
            ev = std::max(ev, std::abs(sol.vhat_minus[i][0] - cf.vhat_minus));
            ep = std::max(ep, std::abs(sol.p_plus[i] - 1.0));
            em = std::max(em, std::abs(sol.p_minus[i] - cf.p_minus(sol.grid[i])));
        }
        add("beta_neg_vhat_minus", ev, 1e-8);
        add("beta_neg_p_minus", em, 1e-6);
        add("beta_neg_p_plus_one", ep, 1e-10);
    }
    for (const ScalarCaseParams p : {ScalarCaseParams{2.0, 0.3, 0.8, 1.0},
                                     ScalarCaseParams{0.2, 0.3, 0.4, 1.0}}) {
        const std::string tag = p.discriminant() < 0.0 ? "beta_pos_flip" : "beta_pos_noflip";
        const auto model = p.model();
        double ev = 0.0, eh = 0.0;
        for (double pm : {1.0, 0.8, 0.5, 0.2}) {
            const auto r = minimize(Side::minus, 0.0, 1.0, pm, model);
            ev = std::max(ev, std::abs(r.argmin[0] - vhat_minus_beta_pos(p, pm)));
            eh = std::max(eh, std::abs(r.value - hstar_minus_beta_pos(p, pm)));
        }
        add(tag + "_vhat_minus", ev, 1e-6);
        add(tag + "_hstar_minus", eh, 1e-6);
        const auto sol = solve(model, steps);
        const auto ref = p_minus_beta_pos(p, 10 * steps);
        double em = 0.0;
        for (std::size_t i = 0; i < sol.grid.size(); ++i)
            em = std::max(em, std::abs(sol.p_minus[i] - ref[10 * i]));
        add(tag + "_p_minus", em, 1e-6);
        const auto plus = case_beta_pos_p_plus(p, steps);
        add(tag + "_p_plus_one", std::max(plus.max_p_plus_deviation, plus.max_vhat_plus), 1e-10);
    }
    if (user_model) {
        const auto& model = *user_model;
        const auto sol = solve(model, steps);
        if (model.m() <= 3) {
            double e = 0.0;
            for (std::size_t i = 0; i < sol.grid.size(); i += sol.grid.size() / 8) {
                for (Side side : {Side::plus, Side::minus}) {
                    const double pp = sol.p_plus[i], pm = sol.p_minus[i];
                    const double t = sol.grid[i];
                    const double r = coercivity_radius(side, pp, pm, model);
                    const int pts = model.m() == 1 ? 2001 : model.m() == 2 ? 201 : 41;
                    const auto brute = minimize_brute(side, t, pp, pm, model, r, pts);
                    e = std::max(e, std::abs(minimize(side, t, pp, pm, model).value - brute.value));
                }
            }
            add("config_grid_oracle", e, 1e-6);
        }
        try {
            const auto ref = analytic_diffusion_p_minus(model);
            double e = 0.0;
            for (std::size_t i = 0; i < sol.grid.size(); ++i)
                e = std::max(e, std::abs(sol.p_minus[i] - ref(sol.grid[i])));
            add("config_diffusion_p_minus", e, 1e-6);
        } catch (const DomainError&) {
            // oracle not applicable to this market
        }
    }
    return rows;
}

inline MarketModel load_valid_model(const nlohmann::json& cfg, std::ostream& err) {
    MarketModel model = model_from_json(cfg);
    const auto rep = validate(model);
    if (!rep.valid()) {
        print_report(err, rep);
        throw StructuralError("market fails validation");
    }
    return model;
}

inline std::pair<double, double> parse_point(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw UsageError("--at expects T,X but got " + s);
    try {
        return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
    } catch (const std::exception&) {
        throw UsageError("--at expects two numbers T,X but got " + s);
    }
}

inline void write_paths_csv(std::ostream& os, const std::vector<PathRecord>& paths) {
    os << "path_id,t,X,is_jump\n";
    for (std::size_t p = 0; p < paths.size(); ++p)
        for (const auto& pt : paths[p])
            os << p << ',' << fmt(pt.t) << ',' << fmt(pt.x) << ',' << (pt.is_jump ? 1 : 0) << '\n';
}

}  // namespace detail

inline int execute(RunConfig rc, const CLI::App& app, std::ostream& out, std::ostream& err) {
    using namespace detail;
    std::optional<nlohmann::json> cfg;
    if (!rc.config_path.empty()) {
        cfg = read_json_file(rc.config_path);
        merge_run_section(rc, *cfg, app);
    }
    check_numbers(rc);
    const bool needs_config = rc.command != "oracle-check";
    if (needs_config && !cfg) throw UsageError("--config is required for " + rc.command);

    if (rc.command == "validate") {
        const auto model = model_from_json(*cfg);
        const auto rep = validate(model);
        print_report(out, rep);
        return rep.valid() ? kOk : kInvalid;
    }
    if (rc.command == "oracle-check") {
        std::optional<MarketModel> model;
        if (cfg) model = load_valid_model(*cfg, err);
        const auto rows = oracle_suite(model, rc.steps);
        Sink sink(rc.output_path, out);
        *sink << "check,passed,error,tolerance\n";
        bool all = true;
        for (const auto& r : rows) {
            *sink << r.name << ',' << (r.passed ? "pass" : "FAIL") << ',' << fmt(r.error) << ','
                  << fmt(r.tolerance) << '\n';
            all = all && r.passed;
        }
        return all ? kOk : kNumeric;
    }

    const MarketModel model = load_valid_model(*cfg, err);
    SolveOptions sopt;
    sopt.steps = rc.steps;
    sopt.tol = rc.tol;
    auto sol = std::make_shared<const RiccatiSolution>(solve(model, sopt));

    if (rc.command == "solve") {
        Sink sink(rc.output_path, out);
        write_csv(*sink, *sol);
        return kOk;
    }
    if (rc.command == "frontier") {
        if (rc.z.empty()) throw UsageError("frontier needs at least one --z");
        Sink sink(rc.output_path, out);
        *sink << "z,variance,std\n";
        for (const auto& f : frontier(rc.x0, rc.z, *sol))
            *sink << fmt(f.z) << ',' << fmt(f.variance) << ',' << fmt(f.std) << '\n';
        return kOk;
    }
    if (rc.command == "policy-eval") {
        if (rc.z.empty() && !rc.d) throw UsageError("policy-eval needs --z or --d");
        if (rc.at.empty()) throw UsageError("policy-eval needs at least one --at T,X");
        PolicySpec pol = rc.d ? PolicySpec{rc.x0, rc.z.empty() ? rc.x0 : rc.z.front(), *rc.d, sol}
                              : make_policy(rc.x0, rc.z.front(), sol);
        Sink sink(rc.output_path, out);
        *sink << "t,x";
        for (Eigen::Index i = 1; i <= model.m(); ++i) *sink << ",pi_" << i;
        *sink << '\n';
        for (const auto& s : rc.at) {
            const auto [t, x] = parse_point(s);
            const Eigen::VectorXd pi = feedback(t, x, pol);
            *sink << fmt(t) << ',' << fmt(x);
            for (Eigen::Index i = 0; i < pi.size(); ++i) *sink << ',' << fmt(pi[i]);
            *sink << '\n';
        }
        return kOk;
    }
    if (rc.command == "simulate") {
        if (rc.z.empty() && !rc.d) throw UsageError("simulate needs --z or --d");
        const double d = rc.d ? *rc.d : d_star(rc.x0, rc.z.front(), *sol);
        SimConfig sc;
        sc.n_paths = rc.n_paths;
        sc.dt = rc.dt;
        sc.seed = rc.seed;
        sc.threads = rc.threads;
        sc.record_paths = rc.record_paths;
        const OptimalFeedback fb(*sol, d, rc.dt);
        const auto st = simulate(model, fb, rc.x0, d, sc);

        Sink sink(rc.output_path, out);
        auto& o = *sink;
        o << "n_paths=" << st.n_paths << '\n'
          << "overflow_paths=" << st.overflow_paths << '\n'
          << "x0=" << fmt(rc.x0) << '\n'
          << "d=" << fmt(d) << '\n'
          << "mean_XT=" << fmt(st.mean_XT) << '\n'
          << "se_mean_XT=" << fmt(st.se_mean) << '\n'
          << "var_XT=" << fmt(st.var_XT) << '\n'
          << "se_var_XT=" << fmt(st.se_var) << '\n'
          << "second_moment_about_d=" << fmt(st.second_moment_about_d) << '\n'
          << "se_second_moment_about_d=" << fmt(st.se_second_moment) << '\n'
          << "jump_count_mean=" << fmt(st.jump_count_mean) << '\n'
          << "sign_changes=" << st.sign_changes.sign_changes << '\n'
          << "sign_changes_at_jumps=" << st.sign_changes.at_jumps << '\n'
          << "jump_events=" << st.sign_changes.jump_events << '\n'
          << "flipping_jumps=" << st.sign_changes.flipping_jumps << '\n';
        const double target = lagrangian_value(rc.x0, d, *sol);
        o << "value_target=" << fmt(target) << '\n'
          << "value_z_score=" << fmt(mvjump::detail::z_of(st.second_moment_about_d, target, st.se_second_moment))
          << '\n';
        if (!rc.z.empty() && !rc.d) {
            const double z = rc.z.front();
            const double tv = frontier_variance(rc.x0, z, *sol);
            o << "mean_target=" << fmt(z) << '\n'
              << "mean_z_score=" << fmt(mvjump::detail::z_of(st.mean_XT, z, st.se_mean)) << '\n'
              << "variance_target=" << fmt(tv) << '\n'
              << "variance_z_score=" << fmt(mvjump::detail::z_of(st.var_XT, tv, st.se_var)) << '\n';
        }
        if (!rc.paths_output.empty()) {
            Sink ps(rc.paths_output, out);
            write_paths_csv(*ps, st.paths);
        }
        if (st.overflow_paths > 0) {
            err << "warning: " << st.overflow_paths << " paths overflowed and were excluded\n";
            return kNumeric;
        }
        return kOk;
    }
    throw UsageError("unknown command " + rc.command);
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Mean-variance portfolio selection with jumps under no shorting", "mvjump"};
    app.require_subcommand(1);
    RunConfig rc;

    auto common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", rc.config_path, "market JSON file");
        if (config_required) c->required();
        sub->add_option("--output", rc.output_path, "output file (default stdout)");
        sub->add_option("--steps", rc.steps, "RK4 steps for the backward ODE");
        sub->add_option("--tol", rc.tol, "KKT tolerance of the Hamiltonian minimizer");
    };
    auto* v = app.add_subcommand("validate", "check the market against the standing assumptions");
    common(v, true);
    auto* s = app.add_subcommand("solve", "solve the backward ODE and write the table as CSV");
    common(s, true);
    auto* f = app.add_subcommand("frontier", "efficient frontier as CSV z,variance,std");
    common(f, true);
    f->add_option("--x0", rc.x0, "initial wealth");
    f->add_option("--z", rc.z, "target means")->expected(1, -1);
    auto* pe = app.add_subcommand("policy-eval", "optimal feedback at given (t, x) pairs");
    common(pe, true);
    pe->add_option("--x0", rc.x0, "initial wealth");
    pe->add_option("--z", rc.z, "target mean")->expected(1);
    pe->add_option("--d", rc.d, "explicit vertex instead of d*");
    pe->add_option("--at", rc.at, "evaluation point T,X")->expected(1, -1);
    auto* sim = app.add_subcommand("simulate", "Monte Carlo of the optimal strategy");
    common(sim, true);
    sim->add_option("--x0", rc.x0, "initial wealth");
    sim->add_option("--z", rc.z, "target mean")->expected(1);
    sim->add_option("--d", rc.d, "explicit vertex instead of d*");
    sim->add_option("--n-paths", rc.n_paths, "number of paths");
    sim->add_option("--dt", rc.dt, "Euler step");
    sim->add_option("--seed", rc.seed, "RNG seed");
    sim->add_option("--threads", rc.threads, "worker threads");
    sim->add_option("--record-paths", rc.record_paths, "number of full paths to keep");
    sim->add_option("--paths-output", rc.paths_output, "CSV for recorded paths");
    auto* oc = app.add_subcommand("oracle-check", "closed-form cross checks");
    common(oc, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << app.help();
        return kUsage;
    }
    rc.command = app.get_subcommands().front()->get_name();
    const CLI::App& sub = *app.get_subcommands().front();

    try {
        return execute(std::move(rc), sub, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const StructuralError& e) {
        err << "invalid input: " << e.what() << '\n';
        return kInvalid;
    } catch (const nlohmann::json::exception& e) {
        err << "invalid config: " << e.what() << '\n';
        return kInvalid;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const InvariantError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumeric;
    }
}

}  // namespace mvjump::cli
