// Batch front door: solve / sweep / physical / minimize / verify / dispersion
// subcommands over the steady-state laboratory, JSON-configured, CSV/JSON out.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nvpoly/config.hpp"
#include "nvpoly/dispersion.hpp"
#include "nvpoly/functionals.hpp"
#include "nvpoly/io.hpp"
#include "nvpoly/momentum_integrals.hpp"
#include "nvpoly/radial_ode.hpp"
#include "nvpoly/steady_state.hpp"
#include "nvpoly/variational.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_battery = 3;
constexpr int exit_usage = 64;
constexpr int exit_config = 66;

struct CommonArgs {
    std::string config_path;
    std::string out_prefix = "nvpoly";
    std::optional<double> k, a, c;
    std::optional<double> epsilon, rel_tol, abs_tol, r_max;
    std::optional<bool> mu_table;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_a = true) {
    cmd->add_option("--config", args.config_path, "JSON config file (or $NVPOLY_CONFIG)");
    cmd->add_option("--out", args.out_prefix, "output path prefix");
    cmd->add_option("--k", args.k, "polytrope exponent in (0,2)");
    if (with_a) cmd->add_option("--a", args.a, "shooting parameter psi(eps) < 0");
    cmd->add_option("--c", args.c, "ansatz scale constant c > 0");
    cmd->add_option("--epsilon", args.epsilon, "center cutoff");
    cmd->add_option("--rel-tol", args.rel_tol, "step controller relative tolerance");
    cmd->add_option("--abs-tol", args.abs_tol, "step controller absolute tolerance");
    cmd->add_option("--r-max", args.r_max, "integration horizon");
    cmd->add_option("--mu-table", args.mu_table, "use the mu interpolation table");
}

struct Effective {
    nvpoly::RunConfig cfg;
    nvpoly::SolverConfig solver;
    double k = 1.0, a = -1.0, c = 1.0;
    nlohmann::json effective; // for hashing
};

Effective resolve(const CommonArgs& args, const std::string& command) {
    Effective eff;
    eff.cfg = nvpoly::RunConfig::load(args.config_path);
    eff.solver = eff.cfg.solver();
    if (args.epsilon) eff.solver.epsilon = *args.epsilon;
    if (args.rel_tol) eff.solver.rel_tol = *args.rel_tol;
    if (args.abs_tol) eff.solver.abs_tol = *args.abs_tol;
    if (args.r_max) eff.solver.r_max = *args.r_max;
    if (args.mu_table) eff.solver.use_mu_table = *args.mu_table;
    eff.k = args.k ? *args.k : eff.cfg.value("polytrope.k", 1.0);
    eff.a = args.a ? *args.a : eff.cfg.value("polytrope.a", -1.0);
    eff.c = args.c ? *args.c : eff.cfg.value("polytrope.c", 1.0);
    eff.solver.validate();

    eff.effective = {{"command", command},
                     {"k", eff.k},
                     {"a", eff.a},
                     {"c", eff.c},
                     {"ode",
                      {{"epsilon", eff.solver.epsilon},
                       {"rel_tol", eff.solver.rel_tol},
                       {"abs_tol", eff.solver.abs_tol},
                       {"r_max", eff.solver.r_max},
                       {"mu_table", eff.solver.use_mu_table},
                       {"mu_table_nodes", eff.solver.mu_table_nodes}}},
                     {"quadrature",
                      {{"abs_tol", eff.solver.quadrature.abs_tol},
                       {"rel_tol", eff.solver.quadrature.rel_tol}}}};
    return eff;
}

int run_solve(const CommonArgs& args) {
    Effective eff = resolve(args, "solve");
    const std::uint64_t hash = nvpoly::config_hash(eff.effective);
    nvpoly::ScaledProfile p = nvpoly::integrate_scaled(eff.a, eff.k, eff.solver);
    nvpoly::write_profile_csv(args.out_prefix + "_profile.csv", hash, p);
    nlohmann::json j = nvpoly::profile_to_json(p);
    if (p.crossed()) j["e0"] = nvpoly::e0_from_profile(p);
    nvpoly::write_json(args.out_prefix + "_profile.json", hash, std::move(j));
    if (!p.crossed())
        std::cerr << "solve: no crossing before r_max; profile flagged\n";
    return exit_ok;
}

int run_sweep(const CommonArgs& args, double a_min, double a_max, int points,
              unsigned jobs, bool want_threshold) {
    Effective eff = resolve(args, "sweep");
    if (!(points >= 1)) throw std::invalid_argument("sweep: points must be >= 1");
    if (!(a_min <= a_max && a_max < 0.0))
        throw std::invalid_argument("sweep: need a_min <= a_max < 0");
    eff.effective["sweep"] = {{"a_min", a_min},
                              {"a_max", a_max},
                              {"points", points},
                              {"threshold", want_threshold}};
    const std::uint64_t hash = nvpoly::config_hash(eff.effective);
    std::vector<double> a_list(points);
    for (int i = 0; i < points; ++i)
        a_list[i] =
            points == 1 ? a_min : a_min + (a_max - a_min) * double(i) / (points - 1);
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    nvpoly::SweepResult res =
        nvpoly::mass_curve(eff.k, a_list, eff.c, eff.solver, want_threshold, jobs);
    nvpoly::write_sweep_csv(args.out_prefix + "_sweep.csv", hash, res);
    nvpoly::write_json(args.out_prefix + "_sweep.json", hash, nvpoly::sweep_to_json(res));
    for (const auto& v : res.violations) std::cerr << "sweep: " << v << "\n";
    return exit_ok;
}

int run_physical(const CommonArgs& args) {
    Effective eff = resolve(args, "physical");
    const std::uint64_t hash = nvpoly::config_hash(eff.effective);
    nvpoly::ScaledProfile p = nvpoly::integrate_scaled(eff.a, eff.k, eff.solver);
    if (!p.crossed())
        throw std::invalid_argument("physical: no crossing before r_max");
    nvpoly::PhysicalProfile phys = nvpoly::scale_to_physical(p, eff.c);
    nvpoly::write_physical_csv(args.out_prefix + "_physical.csv", hash, phys);
    const nvpoly::MultiplierReport rep = nvpoly::multiplier_consistency(phys, eff.k);
    nlohmann::json j = nvpoly::multiplier_report_to_json(rep);
    j["e0"] = phys.params.e0;
    j["b"] = phys.b;
    j["support_radius"] = phys.support_radius;
    j["mass"] = phys.mass;
    j["lq_norm"] = phys.lq_norm;
    j["i_estimate"] = phys.i_estimate;
    nvpoly::write_json(args.out_prefix + "_multipliers.json", hash, std::move(j));
    if (!rep.all_pass) {
        nlohmann::json fails = nlohmann::json::array();
        for (const auto& c : rep.checks)
            if (!c.pass) fails.push_back({{"check", c.name}, {"rel_err", c.rel_err}});
        std::cerr << fails.dump() << "\n";
        return exit_battery;
    }
    return exit_ok;
}

int run_minimize(const CommonArgs& args, double mass, double lq, std::size_t nr,
                 std::size_t np, double r_max, double p_max, long iters) {
    Effective eff = resolve(args, "minimize");
    eff.effective["minimize"] = {{"mass", mass}, {"lq_norm", lq},     {"nr", nr},
                                 {"np", np},     {"grid_r_max", r_max}, {"grid_p_max", p_max},
                                 {"max_iters", iters}};
    const std::uint64_t hash = nvpoly::config_hash(eff.effective);
    if (!(mass > 0.0) || !(lq > 0.0))
        throw std::invalid_argument("minimize: mass and lq targets must be positive");
    nvpoly::MinimizeConfig mc;
    mc.nr = nr;
    mc.np = np;
    mc.r_max = r_max;
    mc.p_max = p_max;
    mc.max_iters = iters;
    mc.greens = eff.cfg.greens();
    nvpoly::MinimizerResult res = nvpoly::minimize_energy(mass, lq, eff.k, mc);
    nvpoly::write_json(args.out_prefix + "_minimizer.json", hash,
                       nvpoly::minimizer_to_json(res));
    nvpoly::write_trace_csv(args.out_prefix + "_trace.csv", hash, res.trace);
    if (res.below_mass_threshold)
        std::cerr << "minimize: energy stuck at the mass (M <= M0 regime)\n";
    return exit_ok;
}

int run_verify(const CommonArgs& args) {
    Effective eff = resolve(args, "verify");
    const std::uint64_t hash = nvpoly::config_hash(eff.effective);
    nvpoly::ScaledProfile p = nvpoly::integrate_scaled(eff.a, eff.k, eff.solver);
    if (!p.crossed()) throw std::invalid_argument("verify: no crossing before r_max");

    struct Item {
        std::string name;
        double value;
        double tol;
        bool pass;
    };
    std::vector<Item> items;
    auto push = [&](const std::string& name, double value, double tol) {
        items.push_back({name, value, tol, value <= tol});
    };

    nvpoly::PhysicalProfile phys = nvpoly::scale_to_physical(p, eff.c);

    // virial identity on the gridded physical state
    nvpoly::PhaseSpaceState st = nvpoly::make_polytrope_state(phys, 128, 512);
    push("virial_residual", nvpoly::virial_residual(st), 1e-2);

    // exterior field law over all stored nodes
    {
        const double v0 = (*p.r0) * (*p.r0) * p.dpsi_at_r0;
        double worst = 0.0;
        for (std::size_t i = 0; i < p.r_nodes.size(); ++i)
            if (p.r_nodes[i] >= *p.r0)
                worst = std::max(worst, std::abs(p.v[i] - v0) / v0);
        push("exterior_flux_deviation", worst, 1e-8);
    }

    // multiplier identities
    const nvpoly::MultiplierReport rep = nvpoly::multiplier_consistency(phys, eff.k);
    for (const auto& c : rep.checks)
        push("multiplier." + c.name, c.rel_err,
             c.name == "exterior_flux_constant" ? 1e-8 : 1e-4);

    // the two field solvers agree on the potential
    {
        nvpoly::PhaseSpaceState gst = nvpoly::make_polytrope_state(phys, 600, 300);
        const std::vector<double> psi = nvpoly::greens_solve(gst);
        double sup = 0.0;
        for (std::size_t i = 0; i < gst.nr(); ++i)
            sup = std::max(sup, std::abs(psi[i] - gst.phi[i]));
        push("greens_vs_shooting_sup", sup, 1e-6);
    }

    // both scaled-mass routes agree
    push("scaled_mass_route_gap", nvpoly::scaled_mass(p, eff.k).rel_gap(), 1e-6);

    // k = 1 closed form against quadrature, relative across the whole range
    if (std::abs(eff.k - 1.0) < 1e-12) {
        const nvpoly::QuadratureConfig tight{1e-300, 1e-12, 60, 1000000};
        double worst = 0.0;
        for (int i = 0; i <= 400; ++i) {
            const double psi = -20.0 * std::pow(10.0, -8.0 * (400 - i) / 400.0);
            const double quad = nvpoly::mu_scaled(psi, 1.0, tight);
            const double closed = nvpoly::mu_closed_k1(psi);
            const double denom = std::max(std::abs(quad), std::abs(closed));
            if (denom > 0.0) worst = std::max(worst, std::abs(quad - closed) / denom);
        }
        push("mu_closed_form_rel", worst, 1e-10);
    }

    nlohmann::json j;
    nlohmann::json arr = nlohmann::json::array();
    bool all = true;
    for (const auto& it : items) {
        arr.push_back(
            {{"name", it.name}, {"value", it.value}, {"tol", it.tol}, {"pass", it.pass}});
        all = all && it.pass;
    }
    j["checks"] = std::move(arr);
    j["all_pass"] = all;
    nvpoly::write_json(args.out_prefix + "_verify.json", hash, std::move(j));

    if (!all) {
        nlohmann::json fails = nlohmann::json::array();
        for (const auto& it : items)
            if (!it.pass)
                fails.push_back({{"check", it.name}, {"value", it.value}, {"tol", it.tol}});
        std::cerr << fails.dump() << "\n";
        return exit_battery;
    }
    return exit_ok;
}

int run_dispersion(const CommonArgs& args, const std::string& state_path, double xp_moment,
                   double t_max, int t_points) {
    Effective eff = resolve(args, "dispersion");
    eff.effective["dispersion"] = {{"state", state_path},
                                   {"xp_moment", xp_moment},
                                   {"t_max", t_max},
                                   {"t_points", t_points}};
    const std::uint64_t hash = nvpoly::config_hash(eff.effective);
    std::ifstream in(state_path);
    if (!in) throw std::runtime_error("config: cannot read state " + state_path);
    nlohmann::json sj;
    in >> sj;
    const nvpoly::PhaseSpaceState st = nvpoly::state_from_json(sj);
    std::vector<double> t_grid(t_points);
    for (int i = 0; i < t_points; ++i)
        t_grid[i] = t_max * double(i) / std::max(1, t_points - 1);
    const nvpoly::DispersionReport rep = nvpoly::check_dispersion(st, t_grid, xp_moment);
    nvpoly::write_dispersion_csv(args.out_prefix + "_dispersion.csv", hash, rep);
    nlohmann::json j{{"c0", rep.coeffs.c0},     {"c1", rep.coeffs.c1},
                     {"c2", rep.coeffs.c2},     {"h", rep.coeffs.h},
                     {"m", rep.coeffs.m},       {"used_linear", rep.used_linear},
                     {"all_ok", rep.all_ok}};
    if (std::isfinite(rep.first_activation)) j["first_activation"] = rep.first_activation;
    nvpoly::write_json(args.out_prefix + "_coeffs.json", hash, std::move(j));
    return rep.all_ok ? exit_ok : exit_battery;
}

} // namespace

int main(int argc, char** argv) {
    const std::set<std::string> known = {"solve",    "sweep",  "physical",
                                         "minimize", "verify", "dispersion"};
    if (argc >= 2 && argv[1][0] != '-' && !known.count(argv[1])) {
        std::cerr << "unknown subcommand: " << argv[1] << "\n";
        return exit_usage;
    }

    CLI::App app{"isotropic-polytrope steady states of the Nordstrom-Vlasov system"};
    app.require_subcommand(1);

    CommonArgs solve_args;
    CLI::App* solve = app.add_subcommand("solve", "integrate one scaled profile");
    add_common(solve, solve_args);

    CommonArgs sweep_args;
    double a_min = -1.5, a_max = -0.1;
    int points = 20;
    unsigned jobs = 0;
    bool want_threshold = true;
    CLI::App* sweep = app.add_subcommand("sweep", "shooting-parameter sweep + threshold");
    add_common(sweep, sweep_args, false);
    sweep->add_option("--a-min", a_min, "deepest shooting parameter");
    sweep->add_option("--a-max", a_max, "shallowest shooting parameter");
    sweep->add_option("--points", points, "number of sweep rows");
    sweep->add_option("--jobs", jobs, "worker threads (0 = all cores)");
    sweep->add_flag("--threshold,!--no-threshold", want_threshold,
                    "bisect for the regime threshold");

    CommonArgs phys_args;
    CLI::App* physical =
        app.add_subcommand("physical", "physical assembly + multiplier identities");
    add_common(physical, phys_args);

    CommonArgs min_args;
    double min_mass = 1.0, min_lq = 1.0, grid_r = 10.0, grid_p = 1.0;
    std::size_t min_nr = 64, min_np = 64;
    long min_iters = 600;
    CLI::App* minimize =
        app.add_subcommand("minimize", "brute-force constrained energy descent");
    add_common(minimize, min_args, false);
    minimize->add_option("--mass", min_mass, "mass constraint M")->required();
    minimize->add_option("--lq", min_lq, "L^{1+1/k} norm constraint J")->required();
    minimize->add_option("--nr", min_nr, "radial grid nodes");
    minimize->add_option("--np", min_np, "momentum grid nodes");
    minimize->add_option("--grid-r-max", grid_r, "radial grid extent");
    minimize->add_option("--grid-p-max", grid_p, "momentum grid extent");
    minimize->add_option("--iters", min_iters, "descent iteration cap");

    CommonArgs verify_args;
    CLI::App* verify = app.add_subcommand("verify", "full identity battery on one case");
    add_common(verify, verify_args);

    CommonArgs disp_args;
    std::string state_path;
    double xp_moment = 0.0, t_max = 20.0;
    int t_points = 81;
    CLI::App* dispersion =
        app.add_subcommand("dispersion", "conformal-energy coefficient report");
    add_common(dispersion, disp_args, false);
    dispersion->add_option("--state", state_path, "phase-space state JSON")->required();
    dispersion->add_option("--xp-moment", xp_moment, "correlation moment int x.p f0");
    dispersion->add_option("--t-max", t_max, "largest time on the report grid");
    dispersion->add_option("--t-points", t_points, "number of report times");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_validation;
    }

    try {
        if (solve->parsed()) return run_solve(solve_args);
        if (sweep->parsed())
            return run_sweep(sweep_args, a_min, a_max, points, jobs, want_threshold);
        if (physical->parsed()) return run_physical(phys_args);
        if (minimize->parsed())
            return run_minimize(min_args, min_mass, min_lq, min_nr, min_np, grid_r,
                                grid_p, min_iters);
        if (verify->parsed()) return run_verify(verify_args);
        if (dispersion->parsed())
            return run_dispersion(disp_args, state_path, xp_moment, t_max, t_points);
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        std::cerr << msg << "\n";
        return msg.rfind("config:", 0) == 0 ? exit_config : exit_validation;
    }
    return exit_usage;
}
