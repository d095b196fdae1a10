#include "dsoflex/lp.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace dsoflex;
using lp::Sense;
using testing::uniform;

namespace {

lp::Problem random_lp(std::mt19937_64& rng, int rows, int cols) {
    lp::Builder b;
    for (int j = 0; j < cols; ++j) b.add_column("x" + std::to_string(j), 0.0, uniform(rng, 1, 10), uniform(rng, -1, 1));
    for (int i = 0; i < rows; ++i) {
        std::vector<lp::Term> terms;
        for (int j = 0; j < cols; ++j) terms.push_back({j, uniform(rng, -1, 1)});
        const int kind = static_cast<int>(uniform(rng, 0, 3));
        // x = 0 stays feasible for every row kind.
        if (kind == 0) b.add_row("r" + std::to_string(i), terms, Sense::LessEqual, uniform(rng, 0, 5));
        else if (kind == 1) b.add_row("r" + std::to_string(i), terms, Sense::GreaterEqual, uniform(rng, -5, 0));
        else b.add_row("r" + std::to_string(i), terms, Sense::Equal, 0.0);
    }
    return std::move(b).build();
}

}  // namespace

TEST_CASE("lower bound row has unit shadow price") {
    lp::Builder b;
    const int x = b.add_column("x", -lp::kInf, lp::kInf, 1.0);
    b.add_row("lb", {{x, 1.0}}, Sense::GreaterEqual, 3.0);
    const lp::Solution s = lp::solve(std::move(b).build());
    REQUIRE(s.optimal());
    CHECK(s.primal(0) == doctest::Approx(3.0));
    CHECK(s.row_dual(0) == doctest::Approx(1.0));
}

TEST_CASE("row dual signs follow the relaxation convention") {
    lp::Builder b;
    const int x = b.add_column("x", -lp::kInf, lp::kInf, -1.0);
    const int y = b.add_column("y", -lp::kInf, lp::kInf, 1.0);
    b.add_row("cap", {{x, 1.0}}, Sense::LessEqual, 2.0);
    b.add_row("fix", {{y, 1.0}}, Sense::Equal, 4.0);
    const lp::Solution s = lp::solve(std::move(b).build());
    REQUIRE(s.optimal());
    CHECK(s.row_dual(0) == doctest::Approx(1.0));
    CHECK(s.row_dual(1) == doctest::Approx(-1.0));
}

TEST_CASE("contradictory bounds are infeasible") {
    lp::Builder b;
    const int x = b.add_column("x", -lp::kInf, lp::kInf, 1.0);
    b.add_row("a", {{x, 1.0}}, Sense::LessEqual, 0.0);
    b.add_row("b", {{x, 1.0}}, Sense::GreaterEqual, 1.0);
    CHECK(lp::solve(std::move(b).build()).status == lp::Status::Infeasible);
}

TEST_CASE("unbounded direction is reported") {
    lp::Builder b;
    const int x = b.add_column("x", 0.0, lp::kInf, -1.0);
    b.add_row("a", {{x, 1.0}}, Sense::GreaterEqual, 1.0);
    const lp::Problem p = std::move(b).build();
    CHECK(lp::solve(p).status == lp::Status::Unbounded);
    CHECK(lp::brute_force_vertices(p).status == lp::Status::Unbounded);
}

TEST_CASE("builder rejects unknown columns") {
    lp::Builder b;
    b.add_column("x", 0, 1);
    CHECK_THROWS_AS(b.add_row("bad", {{3, 1.0}}, Sense::LessEqual, 0.0), Error);
}

TEST_CASE("brute force on a one-variable box picks the endpoint") {
    lp::Builder b;
    b.add_column("x", -2.0, 5.0, -3.0);
    const lp::VertexResult v = lp::brute_force_vertices(std::move(b).build());
    REQUIRE(v.status == lp::Status::Optimal);
    CHECK(v.argmin(0) == doctest::Approx(5.0));
    CHECK(v.objective == doctest::Approx(-15.0));
}

TEST_CASE("duplicate constraints give the same optimum in both solvers") {
    lp::Builder b;
    const int x = b.add_column("x", 0, lp::kInf, -1.0);
    const int y = b.add_column("y", 0, lp::kInf, -1.0);
    for (int k = 0; k < 3; ++k) b.add_row("cap" + std::to_string(k), {{x, 1.0}, {y, 1.0}}, Sense::LessEqual, 4.0);
    b.add_row("y", {{y, 1.0}}, Sense::LessEqual, 1.0);
    const lp::Problem p = std::move(b).build();
    const lp::Solution s = lp::solve(p);
    const lp::VertexResult v = lp::brute_force_vertices(p);
    REQUIRE(s.optimal());
    REQUIRE(v.status == lp::Status::Optimal);
    CHECK(s.objective == doctest::Approx(-4.0));
    CHECK(v.objective == doctest::Approx(s.objective).epsilon(1e-9));
}

TEST_CASE("random 5x8 programs match vertex enumeration") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 40; ++trial) {
        const lp::Problem p = random_lp(rng, 5, 8);
        const lp::Solution s = lp::solve(p);
        const lp::VertexResult v = lp::brute_force_vertices(p);
        REQUIRE(s.optimal());
        REQUIRE(v.status == lp::Status::Optimal);
        CHECK(std::abs(s.objective - v.objective) <= 1e-7);
        CHECK(lp::primal_residual(p, s.primal) <= 1e-7);
        CHECK(lp::complementary_slackness_residual(p, s) <= 1e-6);
        CHECK(std::abs(lp::dual_objective(p, s) - s.objective) <= 1e-6 * std::max(1.0, std::abs(s.objective)));
    }
}

TEST_CASE("inequality duals are nonnegative") {
    std::mt19937_64 rng(103);
    for (int trial = 0; trial < 30; ++trial) {
        const lp::Problem p = random_lp(rng, 6, 7);
        const lp::Solution s = lp::solve(p);
        REQUIRE(s.optimal());
        for (int i = 0; i < p.num_rows(); ++i)
            if (p.rows[i].sense != Sense::Equal) CHECK(s.row_dual(i) >= -1e-9);
    }
}

TEST_CASE("shadow price predicts the effect of relaxing a binding row") {
    lp::Builder b;
    const int x = b.add_column("x", 0, lp::kInf, -1.0);
    const int y = b.add_column("y", 0, lp::kInf, -2.0);
    b.add_row("a", {{x, 1.0}, {y, 1.0}}, Sense::LessEqual, 4.0);
    b.add_row("b", {{x, 1.0}, {y, 3.0}}, Sense::LessEqual, 6.0);
    const lp::Problem p = std::move(b).build();
    const lp::Solution s = lp::solve(p);
    REQUIRE(s.optimal());
    CHECK(s.objective == doctest::Approx(-5.0));
    const double eps = 1e-4;
    for (int i = 0; i < 2; ++i) {
        lp::Problem q = p;
        q.rows[i].rhs += eps;
        const lp::Solution r = lp::solve(q);
        REQUIRE(r.optimal());
        const double decrease = s.objective - r.objective;
        CHECK(std::abs(decrease - s.row_dual(i) * eps) <= 0.05 * s.row_dual(i) * eps);
    }

    // Random programs: check only rows whose one-sided derivatives agree.
    std::mt19937_64 rng(107);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const lp::Problem rp = random_lp(rng, 5, 8);
        const lp::Solution rs = lp::solve(rp);
        REQUIRE(rs.optimal());
        for (int i = 0; i < rp.num_rows(); ++i) {
            if (std::abs(rs.row_dual(i)) < 1e-6) continue;
            lp::Problem up = rp, dn = rp;
            const double sign = rp.rows[i].sense == Sense::GreaterEqual ? -1.0 : 1.0;
            up.rows[i].rhs += sign * eps;
            dn.rows[i].rhs -= sign * eps;
            const lp::Solution su = lp::solve(up), sd = lp::solve(dn);
            if (!su.optimal() || !sd.optimal()) continue;
            const double relax = rs.objective - su.objective, tighten = sd.objective - rs.objective;
            if (std::abs(relax - tighten) > 1e-3 * std::abs(relax)) continue;
            CHECK(std::abs(relax - rs.row_dual(i) * eps) <= 0.05 * std::abs(rs.row_dual(i)) * eps);
            ++checked;
        }
    }
    CHECK(checked > 20);
}

TEST_CASE("empty program solves trivially") {
    lp::Builder b;
    b.add_objective_offset(2.5);
    const lp::Solution s = lp::solve(std::move(b).build());
    REQUIRE(s.optimal());
    CHECK(s.objective == 2.5);
}

TEST_CASE("LP export names every column and row") {
    lp::Builder b;
    const int x = b.add_column("x", 0, 3, 1.0);
    const int y = b.add_column("y", -lp::kInf, lp::kInf, -1.0);
    b.add_row("r1", {{x, 1.0}, {y, -2.0}}, Sense::GreaterEqual, 1.0);
    b.add_row("r2", {{y, 1.0}}, Sense::Equal, 0.5);
    std::ostringstream os;
    lp::write_lp(std::move(b).build(), os);
    const std::string text = os.str();
    CHECK(text.find("Minimize") != std::string::npos);
    CHECK(text.find("r1:") != std::string::npos);
    CHECK(text.find("r2:") != std::string::npos);
    CHECK(text.find("y free") != std::string::npos);
    CHECK(text.find("End") != std::string::npos);
}
