// Acceptance criteria 1-11: one PASS/FAIL line each.
//
// Usage: acceptance [--expect-fail N[,N...]]
// The exit status is nonzero when any criterion outside the expected list fails.
// Expected failures still print FAIL.

#include "dsoflex/scenario.hpp"
#include "toys.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <sstream>
#include <string>

using namespace dsoflex;
using namespace testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

const std::vector<double> kBetas{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0};

// Shared state: the shipped scenario is certified once.
struct Shared {
    PreparedScenario ieee33;
    double prepare_seconds = 0.0;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Shared& shared() {
    static Shared s = [] {
        Shared out;
        const auto t0 = std::chrono::steady_clock::now();
        out.ieee33 = prepare(load_scenario(data_path("ieee33/scenario.json")));
        out.prepare_seconds = seconds_since(t0);
        return out;
    }();
    return s;
}

HpThermalSpec random_hp(std::mt19937_64& rng, int T) {
    HpThermalSpec hp;
    hp.capacitance = uniform(rng, 5, 15);
    hp.conductance = uniform(rng, 0.1, 0.5);
    hp.cop = uniform(rng, 2.5, 4.0);
    hp.theta_amb = random_profile(rng, T, 268, 288);
    hp.theta_set = random_profile(rng, T, 291, 295);
    hp.theta0 = uniform(rng, 291, 295);
    hp.rho_up = hp.rho_dn = Profile::Zero(T);
    hp.dtheta_up_max = hp.dtheta_dn_max = Profile::Ones(T);
    return hp;
}

Outcome c1_equality() {
    Shared& sh = shared();
    PreparedScenario p = sh.ieee33;
    p.scenario.options.ignore_voltage = true;
    const auto t0 = std::chrono::steady_clock::now();
    const RunResult r = run(p);
    const double secs = sh.prepare_seconds + seconds_since(t0);
    const double tol = 1e-6 * std::max(1.0, std::abs(r.settlement.lhs));
    const bool ok = std::abs(r.settlement.surplus) <= tol && secs <= 60.0;
    return {ok, "|surplus| " + num(std::abs(r.settlement.surplus)) + " <= " + num(tol) + ", certification+clearing " +
                    num(secs) + " s <= 60 s (32 aggregators, T=24)"};
}

Outcome c2_inequality() {
    const PreparedScenario p = prepare(load_scenario(data_path("ieee33/scenario_tight.json")));
    const RunResult r = run(p);
    const bool ok = r.settlement.voltage_binding && r.settlement.surplus > 1e-6;
    return {ok, "max voltage dual " + num(r.settlement.max_voltage_dual) + ", surplus " + num(r.settlement.surplus) +
                    " EUR > 1e-6"};
}

Outcome c3_incentive() {
    const PreparedScenario& p = shared().ieee33;
    const std::string id = p.scenario.options.single_aggregator;
    const std::vector<SweepRow> rows = sweep_beta(p, SweepMode::Single, p.aggregator_index(id), kBetas);
    double at_one = 0, best = -1e300, best_beta = 0;
    for (const SweepRow& r : rows) {
        if (!r.ok) return {false, "beta " + num(r.beta) + " failed: " + r.message};
        if (r.beta == 1.0) at_one = r.profit;
        if (r.profit > best) {
            best = r.profit;
            best_beta = r.beta;
        }
    }
    bool ok = true;
    for (const SweepRow& r : rows) ok &= at_one >= r.profit - 1e-6;
    return {ok, id + ": profit(1) " + num(at_one) + " EUR, best " + num(best) + " at beta " + num(best_beta)};
}

Outcome c4_monotone() {
    const std::vector<SweepRow> rows = sweep_beta(shared().ieee33, SweepMode::All, -1, kBetas);
    double worst = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (!rows[k].ok) return {false, "beta " + num(rows[k].beta) + " failed: " + rows[k].message};
        if (k > 0) worst = std::max(worst, rows[k - 1].C_net - rows[k].C_net);
    }
    return {worst <= 1e-6, "largest decrease of C_net " + num(worst) + " EUR, C_net " + num(rows.front().C_net) +
                               " -> " + num(rows.back().C_net)};
}

Outcome c5_transform() {
    std::mt19937_64 rng(2024);
    const int T = 24;
    double worst = 0, worst_scaled = 0, worst_inv = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const TimeGrid g{T, 1.0};
        const HpThermalSpec hp = random_hp(rng, T);
        const Eigen::MatrixXd D = hp_matrix_D(hp, g);
        const Profile pb = hp_baseline_power(hp, g);
        const Profile p = pb + random_profile(rng, T, -1, 1);
        const Profile lhs = g.dt * prefix_sum_matrix<double>(T) * (p - pb);
        const Profile dev = simulate_temperature(hp, p, g) - hp.theta_set;
        worst = std::max(worst, (lhs - D * dev).cwiseAbs().maxCoeff());
        worst_scaled = std::max(worst_scaled, (lhs - D * dev / (1 - hp.alpha(g.dt))).cwiseAbs().maxCoeff());
        worst_inv = std::max(worst_inv, (D * D.inverse() - Eigen::MatrixXd::Identity(T, T)).cwiseAbs().maxCoeff());
    }
    const bool ok = worst <= 1e-8 && worst_inv <= 1e-10;
    return {ok, "max |dt L dp - D dtheta| " + num(worst) + " kWh (limit 1e-8), |D D^-1 - I| " + num(worst_inv) +
                    "; with D/(1-alpha) the residual is " + num(worst_scaled)};
}

Outcome c6_closed_form() {
    std::mt19937_64 rng(2025);
    const int T = 24;
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const TimeGrid g{T, uniform(rng, 0.25, 1.0)};
        HpThermalSpec hp = random_hp(rng, T);
        const double rho0 = uniform(rng, 0.0, 0.01);
        hp.rho_dn.setConstant(rho0);
        const DerSpec s = build_hp_spec(hp, 1e3, g);
        const double a = hp.alpha(g.dt);
        for (int t = 1; t <= T; ++t) {
            const double expect = hp.cop / (hp.conductance * g.dt) * rho0 * std::pow(a, T - t);
            worst = std::max(worst, std::abs(s.c_e_dn(t - 1) - expect));
        }
    }
    return {worst <= 1e-9, "max deviation " + num(worst) + " EUR/kWh over 100 specs (limit 1e-9)"};
}

Outcome c7_oracle() {
    std::mt19937_64 rng(2026);
    double worst_obj = 0, worst_cs = 0;
    int cols = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const Toy t = random_toy(rng);
        const MarketSolution s = clear_market(t.grid, t.bids, t.prices, t.time);
        if (!s.optimal()) return {false, "toy " + std::to_string(trial) + ": " + s.message};
        const lp::VertexResult v = lp::brute_force_vertices(s.lp.problem);
        if (v.status != lp::Status::Optimal) return {false, "toy " + std::to_string(trial) + ": enumeration failed"};
        cols = std::max(cols, s.lp.problem.num_cols());
        worst_obj = std::max(worst_obj, std::abs(s.lp_solution.objective - v.objective));
        worst_cs = std::max(worst_cs, lp::complementary_slackness_residual(s.lp.problem, s.lp_solution));
    }
    const bool ok = worst_obj <= 1e-7 && worst_cs <= 1e-6 && cols <= 12;
    return {ok, "50 toys with <= " + std::to_string(cols) + " columns: objective gap " + num(worst_obj) +
                    ", complementary slackness " + num(worst_cs)};
}

Outcome c8_soundness() {
    const PreparedScenario& p = shared().ieee33;
    const int h = p.aggregator_index(p.scenario.options.single_aggregator);
    const std::vector<DerSpec>& ders = p.fleets[h].ders;
    const FlexRegion& inner = p.bids[h].region;
    const TimeGrid& g = p.scenario.time;
    std::mt19937_64 rng(2027);
    int disagg = 0, contained = 0;
    for (int k = 0; k < 100; ++k) disagg += disaggregate(ders, random_region_point(rng, inner), g).feasible;
    const FlexRegion outer = aggregate_outer(ders, g);
    for (int k = 0; k < 100; ++k) {
        Profile sum = Profile::Zero(g.T);
        for (const DerSpec& d : ders) sum += random_der_point(rng, d, g);
        contained += outer.contains(sum, 1e-6);
    }
    return {disagg == 100 && contained == 100,
            p.bids[h].id + " (" + std::to_string(ders.size()) + " DERs, shrink " + num(p.inner[h].shrink) +
                "): " + std::to_string(disagg) + "/100 interior points disaggregate, " + std::to_string(contained) +
                "/100 sums inside the outer region"};
}

Outcome c9_kkt() {
    const Toy t = binding_voltage_toy();
    const MarketSolution s = clear_market(t.grid, t.bids, t.prices, t.time);
    if (!s.optimal()) return {false, s.message};
    const KktAggregatorReport k = kkt_report(s, t.bids).front();
    const bool ok = !k.degenerate && !k.interior_rows.empty() && s.max_voltage_dual > 1e-8 && k.max_residual <= 1e-6;
    return {ok, std::to_string(k.interior_rows.size()) + " interior row(s), max |lambda - c| " + num(k.max_residual) +
                    ", voltage dual " + num(s.max_voltage_dual)};
}

Outcome c10_same_node() {
    const PreparedScenario p = prepare(load_scenario(data_path("same_node/scenario.json")));
    const RunResult r = run(p);
    const AggregatorResult& a = r.solution.aggregators.at(0);
    const AggregatorResult& b = r.solution.aggregators.at(1);
    if (p.bids[0].node != p.bids[1].node) return {false, "aggregators are not at the same node"};
    const double d = std::max((a.mfp_up - b.mfp_up).cwiseAbs().maxCoeff(), (a.mfp_dn - b.mfp_dn).cwiseAbs().maxCoeff());
    return {d > 1e-4, a.id + " vs " + b.id + " at node " + std::to_string(p.bids[0].node) +
                          ": max MFP difference " + num(d) + " EUR > 1e-4"};
}

Outcome c11_coincidence() {
    const PreparedScenario& p = shared().ieee33;
    const RunResult r = run(p);
    const MarketSolution& s = r.solution;
    const double d = (s.P0_ru - s.P0_ref).cwiseAbs().maxCoeff();
    const double mean_e = p.prices.c_energy.mean() * 1e3, mean_ru = p.prices.c_ru.mean() * 1e3;
    return {d <= 1e-6, "max |P0_ru - P0_ref| " + num(d) + " kW; mean prices " + num(mean_e) + " EUR/MWh vs " +
                           num(mean_ru) + " EUR/MW up-reserve"};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> expected;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--expect-fail") == 0 && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            for (std::string tok; std::getline(ss, tok, ',');) expected.insert(std::stoi(tok));
        } else {
            std::fprintf(stderr, "usage: %s [--expect-fail N[,N...]]\n", argv[0]);
            return 2;
        }
    }

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"revenue adequacy, equality without voltage limits", c1_equality},
        {"revenue adequacy, strict surplus with binding voltage", c2_inequality},
        {"truthful bidding maximises single-aggregator profit", c3_incentive},
        {"net cost nondecreasing in global beta", c4_monotone},
        {"temperature-to-energy transform along simulated trajectories", c5_transform},
        {"heat-pump coefficient closed form", c6_closed_form},
        {"toy clearing LPs match vertex enumeration", c7_oracle},
        {"disaggregation soundness of certified regions", c8_soundness},
        {"marginal price equals cost on interior rows", c9_kkt},
        {"distinct prices for two aggregators at one node", c10_same_node},
        {"up-reserve root profile coincides with reference", c11_coincidence},
    };

    int passed = 0, unexpected = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const bool known = expected.count(id) > 0;
        passed += o.pass;
        unexpected += !o.pass && !known;
        std::printf("criterion %2d %s  %s: %s%s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", criteria[k].first.c_str(),
                    o.detail.c_str(), !o.pass && known ? " (known failure)" : "", seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria pass; %d unexpected failure(s)\n", passed, criteria.size(), unexpected);
    return unexpected == 0 ? 0 : 1;
}
