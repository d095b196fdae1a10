#include "dsoflex/grid.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace dsoflex;

namespace {

GridModel parse(const std::string& text, int T = 1, Warnings* w = nullptr) {
    std::istringstream in(text);
    return load_grid(in, {T, 1.0}, "test", w);
}

struct Solved {
    ScenarioVars vars;
    lp::Solution sol;
    double V(int node, int t = 0) const { return sol.primal(vars.col(vars.V[node], t)); }
};

// Baseline flows: every attachment fixed to `inj` kW.
Solved solve_flows(const GridModel& g, const std::vector<Attachment>& att = {}, double inj = 0.0,
                   bool ignore_voltage = true) {
    lp::Builder b;
    Solved s;
    s.vars = emit_lindistflow(g, b, "ru", att, {ignore_voltage});
    for (std::size_t a = 0; a < att.size(); ++a)
        for (int t = 0; t < g.T(); ++t)
            b.add_row("fix", {{s.vars.col(s.vars.P_h[a], t), 1.0}}, lp::Sense::Equal, inj);
    s.sol = lp::solve(std::move(b).build());
    return s;
}

const char* kTwoNode = R"(
s_base_kva 1000
[nodes]
1 - - 200 100 flat
[lines]
0 1 0.01 0.02
)";

}  // namespace

TEST_CASE("two-node document loads") {
    const GridModel g = parse(kTwoNode);
    CHECK(g.num_nodes == 2);
    CHECK(g.lines.size() == 1);
    CHECK(g.v_lo[1] == doctest::Approx(kDefaultVlo));
    CHECK(g.v_hi[1] == doctest::Approx(kDefaultVhi));
    CHECK(g.p_fix[1](0) == 200.0);
}

TEST_CASE("two-node voltage follows the single-line drop formula") {
    const GridModel g = parse(kTwoNode);
    const Solved s = solve_flows(g);
    REQUIRE(s.sol.optimal());
    CHECK(s.V(1) == doctest::Approx(1.0 - 2.0 * (0.01 * 0.2 + 0.02 * 0.1)).epsilon(1e-12));
    CHECK(s.sol.primal(s.vars.col(s.vars.P0, 0)) == doctest::Approx(200.0));
}

TEST_CASE("attachment power factor ties reactive to active power") {
    const GridModel g = parse(kTwoNode);
    const Solved s = solve_flows(g, {{1, 0.5}}, 40.0);
    REQUIRE(s.sol.optimal());
    CHECK(s.sol.primal(s.vars.col(s.vars.Q_h[0], 0)) == doctest::Approx(20.0));
    CHECK(s.V(1) == doctest::Approx(1.0 - 2.0 * (0.01 * 0.24 + 0.02 * 0.12)).epsilon(1e-12));
}

TEST_CASE("unloaded network sits at nominal voltage with zero flows") {
    const GridModel g = parse("[lines]\n0 1 0.01 0.02\n1 2 0.01 0.02\n0 3 0.02 0.01\n");
    const Solved s = solve_flows(g);
    REQUIRE(s.sol.optimal());
    for (int i = 0; i < 4; ++i) CHECK(s.V(i) == doctest::Approx(1.0));
    for (std::size_t k = 0; k < g.lines.size(); ++k) CHECK(s.sol.primal(s.vars.P_line[k]) == doctest::Approx(0.0));
}

TEST_CASE("topology errors are reported") {
    CHECK_THROWS_WITH_AS(parse("[lines]\n0 1 0.01 0.02\n0 1 0.01 0.02\n"), doctest::Contains("cycle"), Error);
    CHECK_THROWS_WITH_AS(parse("[lines]\n0 1 0.01 0.02\n2 3 0.01 0.02\n"), doctest::Contains("disconnected"), Error);
    CHECK_THROWS_AS(parse("[lines]\n0 1 -0.01 0.02\n"), Error);
    CHECK_THROWS_AS(parse("[lines]\n0 1 0 0.02\n"), Error);
    CHECK_THROWS_AS(parse("[bogus]\n"), Error);
    CHECK_THROWS_AS(parse("[nodes]\n1 - - 1 1 nosuchshape\n[lines]\n0 1 0.01 0.02\n"), Error);
}

TEST_CASE("voltage band excluding nominal is a warning") {
    Warnings w;
    parse("[nodes]\n1 0.96 0.99 0 0 flat\n[lines]\n0 1 0.01 0.02\n", 1, &w);
    CHECK(w.size() == 1);
}

TEST_CASE("lines are reoriented away from the root") {
    const GridModel g = parse("[lines]\n2 1 0.01 0.02\n1 0 0.01 0.02\n");
    REQUIRE(g.lines.size() == 2);
    CHECK(g.lines[0].from == 0);
    CHECK(g.lines[0].to == 1);
    CHECK(g.lines[1].from == 1);
    CHECK(g.parent_line[2] == 1);
}

TEST_CASE("shipped IEEE-33 feeder is radial with 33 nodes") {
    const GridModel g = load_grid_file(testing::data_path("ieee33/grid.txt"), {24, 1.0});
    CHECK(g.num_nodes == 33);
    CHECK(g.lines.size() == 32);
    for (int i = 1; i < 33; ++i) CHECK(g.parent_line[i] >= 0);
}

TEST_CASE("IEEE-33 voltages fall along every path and conserve power") {
    const GridModel g = load_grid_file(testing::data_path("ieee33/grid.txt"), {24, 1.0});
    const Solved s = solve_flows(g);
    REQUIRE(s.sol.optimal());
    for (int t = 0; t < 24; ++t) {
        double total = 0;
        for (int i = 0; i < 33; ++i) total += g.p_fix[i](t);
        CHECK(s.sol.primal(s.vars.col(s.vars.P0, t)) == doctest::Approx(total).epsilon(1e-10));
        for (const Line& l : g.lines) CHECK(s.V(l.to, t) <= s.V(l.from, t) + 1e-12);
    }
}

TEST_CASE("doubling loads doubles the voltage drop") {
    GridModel g = load_grid_file(testing::data_path("ieee33/grid.txt"), {24, 1.0});
    const Solved one = solve_flows(g);
    for (int i = 0; i < 33; ++i) {
        g.p_fix[i] *= 2;
        g.q_fix[i] *= 2;
    }
    const Solved two = solve_flows(g);
    REQUIRE(one.sol.optimal());
    REQUIRE(two.sol.optimal());
    for (int i = 1; i < 33; ++i)
        CHECK(1.0 - two.V(i, 18) == doctest::Approx(2.0 * (1.0 - one.V(i, 18))).epsilon(1e-9));
}

TEST_CASE("voltage rows are emitted unless ignored") {
    const GridModel g = parse(kTwoNode, 3);
    lp::Builder b;
    const ScenarioVars with = emit_lindistflow(g, b, "ru", {});
    CHECK(with.v_lo_row[1] >= 0);
    CHECK(with.v_hi_row[1] == with.v_lo_row[1] + 3);
    CHECK(with.v_lo_row[0] == -1);
    const ScenarioVars without = emit_lindistflow(g, b, "rd", {}, {true});
    CHECK(without.v_lo_row[1] == -1);
    CHECK(without.first_row == with.end_row);
}
