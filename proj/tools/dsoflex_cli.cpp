#include "dsoflex/scenario.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

using namespace dsoflex;

namespace {

struct Common {
    std::string scenario;
    bool ignore_voltage = false;
    double shrink = -1.0;
    long long seed = -1;
    std::string out_dir = "out";
};

void add_common(CLI::App* cmd, Common& c, bool with_outdir) {
    cmd->add_option("scenario", c.scenario, "scenario file (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_flag("--ignore-voltage", c.ignore_voltage, "drop voltage-limit constraints");
    cmd->add_option("--shrink", c.shrink, "initial energy-row shrink factor in [0,1]")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--seed", c.seed, "seed for certification probes");
    if (with_outdir) cmd->add_option("-o,--out", c.out_dir, "output directory");
}

Scenario load(const Common& c) {
    Scenario s = load_scenario(c.scenario);
    if (c.ignore_voltage) s.options.ignore_voltage = true;
    if (c.shrink >= 0) s.options.shrink = c.shrink;
    if (c.seed >= 0) s.options.seed = static_cast<std::uint64_t>(c.seed);
    return s;
}

void print_warnings(const Warnings& w) {
    for (const std::string& s : w) std::cerr << "warning: " << s << '\n';
}

int cmd_validate(const Common& c, bool certify) {
    const PreparedScenario p = prepare(load(c), certify);
    print_warnings(p.warnings);
    std::size_t ders = 0;
    for (const Fleet& f : p.fleets) ders += f.ders.size();
    const std::vector<AggregatorBid>& bids = p.bids;
    std::cout << "scenario " << p.scenario.name << ": " << p.grid.num_nodes << " nodes, "
              << p.grid.lines.size() << " lines, " << p.fleets.size() << " aggregators, " << ders
              << " DERs, T=" << p.scenario.time.T << '\n';
    if (certify) {
        MarketOptions mo = market_options(p.scenario);
        const Profile base = baseline_root_profile(p.grid, bids, p.scenario.time, mo);
        std::cout << "baseline root energy " << fmt(base.sum() * p.scenario.time.dt) << " kWh; network-feasible\n";
    }
    std::cout << "ok\n";
    return 0;
}

int cmd_run(const Common& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const PreparedScenario p = prepare(load(c));
    print_warnings(p.warnings);
    const RunResult r = run(p);
    write_run_reports(p, r, c.out_dir);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const MarketSolution& s = r.solution;
    std::cout << "C_Base        " << fmt(s.C_Base) << " EUR\n"
              << "C_Energy      " << fmt(s.C_Energy) << " EUR\n"
              << "R_Capacity    " << fmt(s.R_Capacity) << " EUR\n"
              << "C_Flexibility " << fmt(s.C_Flexibility) << " EUR\n"
              << "C_net         " << fmt(s.C_net) << " EUR\n"
              << "payments      " << fmt(r.settlement.sum_payments) << " EUR\n"
              << "surplus       " << fmt(r.settlement.surplus) << " EUR"
              << (r.settlement.voltage_binding ? " (voltage limits binding)" : "") << '\n';
    std::cerr << "reports in " << c.out_dir << " (" << fmt(secs) << " s)\n";
    return 0;
}

int cmd_sweep(const Common& c, const std::string& mode_name, std::string aggregator,
              std::vector<double> betas) {
    const PreparedScenario p = prepare(load(c));
    print_warnings(p.warnings);
    if (betas.empty()) betas = p.scenario.options.betas;
    const SweepMode mode = mode_name == "all" ? SweepMode::All : SweepMode::Single;
    int single = -1;
    if (mode == SweepMode::Single) {
        if (aggregator.empty()) aggregator = p.scenario.options.single_aggregator;
        if (aggregator.empty()) throw Error("sweep single: no aggregator given");
        single = p.aggregator_index(aggregator);
    }
    const std::vector<SweepRow> rows = sweep_beta(p, mode, single, betas);
    write_sweep_report(p, mode, single, rows, c.out_dir);
    bool ok = true;
    for (const SweepRow& r : rows) {
        ok &= r.ok;
        std::cout << "beta " << fmt(r.beta) << ": ";
        if (!r.ok) std::cout << "FAILED " << r.message << '\n';
        else if (mode == SweepMode::All)
            std::cout << "C_net " << fmt(r.C_net) << " C_Flexibility " << fmt(r.C_Flexibility) << '\n';
        else
            std::cout << "payment " << fmt(r.payment) << " true_cost " << fmt(r.true_cost) << " profit "
                      << fmt(r.profit) << '\n';
    }
    return ok ? 0 : 2;
}

int cmd_export(const Common& c, const std::string& path) {
    const PreparedScenario p = prepare(load(c));
    print_warnings(p.warnings);
    const MarketLp m = build_market_lp(p.grid, p.bids, p.prices, p.scenario.time, market_options(p.scenario));
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    lp::write_lp(m.problem, out);
    std::cout << "wrote " << path << ": " << m.problem.num_cols() << " columns, " << m.problem.num_rows()
              << " rows\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DSO flexibility market simulator"};
    app.require_subcommand(1);

    Common vc, rc, sc, ec;
    bool certify = false;
    auto* validate = app.add_subcommand("validate", "parse and cross-check a scenario");
    add_common(validate, vc, false);
    validate->add_flag("--certify", certify, "also build certified bids and check the baseline");

    auto* runc = app.add_subcommand("run", "clear the market once and write reports");
    add_common(runc, rc, true);

    std::string mode = "all", aggregator;
    std::vector<double> betas;
    auto* sweep = app.add_subcommand("sweep", "beta sweep of bid coefficients");
    add_common(sweep, sc, true);
    sweep->add_option("--mode", mode, "all or single")->check(CLI::IsMember({"all", "single"}));
    sweep->add_option("--aggregator", aggregator, "aggregator id for single mode");
    sweep->add_option("--betas", betas, "beta values (default from scenario)")->delimiter(',');

    std::string lp_path = "market.lp";
    auto* exp = app.add_subcommand("export-lp", "write the clearing LP in CPLEX LP format");
    add_common(exp, ec, false);
    exp->add_option("-o,--out", lp_path, "output file");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*validate) return cmd_validate(vc, certify);
        if (*runc) return cmd_run(rc);
        if (*sweep) return cmd_sweep(sc, mode, aggregator, betas);
        if (*exp) return cmd_export(ec, lp_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
