#include "dsoflex/market.hpp"
#include "dsoflex/scenario.hpp"
#include "toys.hpp"

#include <doctest.h>

using namespace dsoflex;
using namespace testing;

namespace {

double reserve_bound_residual(const MarketSolution& s) {
    return std::max((s.P0_ru - (s.P0_ref - s.R_up)).cwiseAbs().maxCoeff(),
                    (s.P0_rd - (s.P0_ref + s.R_dn)).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("bids without flexibility leave the baseline untouched") {
    const GridModel g = two_node_grid(3, 80.0, kDefaultVlo);
    const std::vector<AggregatorBid> bids = {power_bid("A", 1, 3, 20.0, 0.0, 0.0, 1.0, 1.0)};
    const MarketSolution s = clear_market(g, bids, flat_prices(3, 0.07, 0.01, 0.02), {3, 1.0});
    REQUIRE(s.optimal());
    CHECK((s.P0_ref - s.P0_base).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(s.P0_base.isApproxToConstant(100.0));
    CHECK(s.R_up.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(s.R_dn.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(s.C_net == doctest::Approx(s.C_Base));
    CHECK(s.aggregators[0].payment == doctest::Approx(0.0));
    const SettlementReport r = settle(s);
    CHECK(std::abs(r.surplus) < 1e-9);
}

TEST_CASE("one-slot toy clears like its vertex enumeration") {
    Toy t;
    t.grid = single_node_grid(1);
    t.bids = {power_bid("A", 0, 1, 5.0, 1.0, 1.0, 0.5, 0.5)};
    t.prices = flat_prices(1, 1.0, 0.0, 2.0);
    const MarketSolution s = clear_market(t.grid, t.bids, t.prices, t.time);
    REQUIRE(s.optimal());
    REQUIRE(s.lp.problem.num_cols() <= 12);
    const lp::VertexResult v = lp::brute_force_vertices(s.lp.problem);
    REQUIRE(v.status == lp::Status::Optimal);
    CHECK(s.lp_solution.objective == doctest::Approx(v.objective).epsilon(1e-9));
    CHECK(s.lp_solution.objective == doctest::Approx(1.0));
    CHECK(s.aggregators[0].ranges.dphi_dn(0) == doctest::Approx(1.0));
    CHECK(s.R_dn(0) == doctest::Approx(2.0));
}

TEST_CASE("random toy markets match vertex enumeration") {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 30; ++trial) {
        const Toy t = random_toy(rng);
        const MarketSolution s = clear_market(t.grid, t.bids, t.prices, t.time);
        REQUIRE(s.optimal());
        const lp::VertexResult v = lp::brute_force_vertices(s.lp.problem);
        REQUIRE(v.status == lp::Status::Optimal);
        CHECK(std::abs(s.lp_solution.objective - v.objective) <= 1e-7);
        CHECK(lp::complementary_slackness_residual(s.lp.problem, s.lp_solution) <= 1e-6);
        CHECK(reserve_bound_residual(s) < 1e-9);
        CHECK(s.C_net == doctest::Approx(s.C_Energy - s.R_Capacity + s.C_Flexibility));
    }
}

TEST_CASE("marginal prices are nonnegative and payments cover bid costs") {
    std::mt19937_64 rng(73);
    for (int trial = 0; trial < 30; ++trial) {
        const Toy t = random_toy(rng);
        const MarketSolution s = clear_market(t.grid, t.bids, t.prices, t.time);
        REQUIRE(s.optimal());
        const AggregatorResult& a = s.aggregators[0];
        CHECK(a.mfp_up.minCoeff() >= -1e-9);
        CHECK(a.mfp_dn.minCoeff() >= -1e-9);
        CHECK(a.payment >= -1e-9);
        CHECK(a.payment >= a.bid_cost - 1e-7);
        const SettlementReport r = settle(s);
        CHECK(std::abs(r.surplus) <= 1e-6 * std::max(1.0, std::abs(r.lhs)));
    }
}

TEST_CASE("binding voltage limit leaves a surplus and interior rows price at cost") {
    const Toy t = binding_voltage_toy();
    const MarketSolution s = clear_market(t.grid, t.bids, t.prices, t.time);
    REQUIRE(s.optimal());
    CHECK(s.aggregators[0].ranges.dphi_up(0) == doctest::Approx(50.0));
    CHECK(s.max_voltage_dual > 1e-6);
    const SettlementReport r = settle(s);
    CHECK(r.voltage_binding);
    CHECK(r.surplus > 1e-6);
    CHECK(r.surplus == doctest::Approx(75.0));
    const std::vector<KktAggregatorReport> k = kkt_report(s, t.bids);
    REQUIRE(k[0].interior_rows.size() == 1);
    CHECK(k[0].interior_rows[0].upward);
    CHECK(k[0].max_residual <= 1e-6);
    CHECK(s.aggregators[0].mfp_up(0) == doctest::Approx(0.5));
}

TEST_CASE("ignoring voltage closes the settlement gap") {
    const Toy t = binding_voltage_toy();
    const MarketSolution s = clear_market(t.grid, t.bids, t.prices, t.time, {true, {}});
    REQUIRE(s.optimal());
    CHECK(s.max_voltage_dual == 0.0);
    CHECK(s.aggregators[0].ranges.dphi_up(0) == doctest::Approx(100.0));
    const SettlementReport r = settle(s);
    CHECK_FALSE(r.voltage_binding);
    CHECK(std::abs(r.surplus) <= 1e-6 * std::max(1.0, r.lhs));
}

TEST_CASE("zero-cost interior activation has a zero marginal price") {
    const Toy t = binding_voltage_toy(0.0);
    const MarketSolution s = clear_market(t.grid, t.bids, t.prices, t.time);
    REQUIRE(s.optimal());
    // Any activation between the voltage-forced 50 kW and the 100 kW bound is optimal.
    CHECK(s.aggregators[0].ranges.dphi_up(0) >= 50.0 - 1e-7);
    CHECK(std::abs(s.aggregators[0].mfp_up(0)) <= 1e-9);
    for (const KktRow& row : kkt_report(s, t.bids)[0].interior_rows) CHECK(row.residual <= 1e-9);
}

TEST_CASE("duplicate aggregators are flagged as degenerate") {
    Toy t = binding_voltage_toy();
    AggregatorBid twin = t.bids[0];
    twin.id = "B";
    t.bids.push_back(twin);
    const MarketSolution s = clear_market(t.grid, t.bids, t.prices, t.time);
    REQUIRE(s.optimal());
    const std::vector<KktAggregatorReport> k = kkt_report(s, t.bids);
    REQUIRE(k.size() == 2);
    CHECK(k[0].degenerate);
    CHECK(k[1].degenerate);
    CHECK(k[0].max_residual == 0.0);
    CHECK(settle(s).surplus >= -1e-6);
}

TEST_CASE("infeasible baseline is reported, not thrown") {
    // 300 kW at node 1 drops V below 0.994 while the limit asks for 0.996.
    const GridModel g = two_node_grid(1, 300.0, 0.996);
    const std::vector<AggregatorBid> bids = {power_bid("A", 1, 1, 0.0, 0.0, 10.0, 0.1, 0.1)};
    const MarketSolution s = clear_market(g, bids, flat_prices(1, 0.1, 0.0, 0.0), {1, 1.0});
    CHECK(s.status == lp::Status::Infeasible);
    CHECK(s.message.rfind("baseline", 0) == 0);
    CHECK_THROWS_AS(baseline_root_profile(g, bids, {1, 1.0}), Error);
    CHECK_THROWS_AS(settle(s), Error);
}

TEST_CASE("market inputs are cross-checked") {
    const GridModel g = two_node_grid(2, 10.0, kDefaultVlo);
    const std::vector<AggregatorBid> far = {power_bid("A", 5, 2, 0.0, 1.0, 1.0, 0.1, 0.1)};
    CHECK_THROWS_AS(build_market_lp(g, far, flat_prices(2, 0.1, 0.0, 0.0), {2, 1.0}), Error);
    const std::vector<AggregatorBid> ok = {power_bid("A", 1, 2, 0.0, 1.0, 1.0, 0.1, 0.1)};
    CHECK_THROWS_AS(build_market_lp(g, ok, flat_prices(2, 0.1, -1.0, 0.0), {2, 1.0}), Error);
    CHECK_THROWS_AS(build_market_lp(g, ok, flat_prices(3, 0.1, 0.0, 0.0), {3, 1.0}), Error);
}

TEST_CASE("scaling a bid scales both coefficient vectors") {
    const AggregatorBid b = power_bid("A", 1, 2, 0.0, 1.0, 1.0, 0.2, 0.3);
    const AggregatorBid s = scale_bid(b, 1.5);
    CHECK(s.c_up(0) == doctest::Approx(0.3));
    CHECK(s.c_dn(1) == doctest::Approx(0.45));
    CHECK_THROWS_AS(scale_bid(b, -1.0), Error);
}

TEST_CASE("same-node scenario clears with consistent identities") {
    const PreparedScenario p = prepare(load_scenario(data_path("same_node/scenario.json")));
    const RunResult r = run(p);
    const MarketSolution& s = r.solution;
    CHECK(reserve_bound_residual(s) < 1e-6);
    CHECK(r.settlement.surplus >= -1e-6);
    for (const AggregatorResult& a : s.aggregators) {
        CHECK(a.mfp_up.minCoeff() >= -1e-9);
        CHECK(a.mfp_dn.minCoeff() >= -1e-9);
    }
    // Energy prices dominate up-reserve prices, so the up-reserve profile meets the reference.
    CHECK((s.P0_ru - s.P0_ref).cwiseAbs().maxCoeff() <= 1e-6);
    // Complementary slackness on every envelope row.
    const Eigen::VectorXd act = s.lp.problem.activities(s.lp_solution.primal);
    for (const MarketLp::BidHandles& h : s.lp.bids)
        for (int first : {h.env_up_ru, h.env_dn_ru, h.env_up_rd, h.env_dn_rd})
            for (int m = 0; m < 48; ++m) {
                const int i = first + m;
                const double slack = std::abs(act(i) - s.lp.problem.rows[i].rhs);
                CHECK(std::abs(s.lp_solution.row_dual(i)) * slack <= 1e-6);
            }
}
