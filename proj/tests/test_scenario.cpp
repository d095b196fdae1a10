#include "dsoflex/scenario.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dsoflex;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dsoflex_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

const char* kFleet = R"({
  "T": 4, "dt_h": 1.0,
  "profiles": {"amb": [280, 279, 281, 282]},
  "ders": [
    {"kind": "EV", "id": "e", "capacity_kwh": 20, "p_rated_kw": 7, "arrive_slot": 0, "depart_slot": 3,
     "e_expected_kwh": 10, "e_min_kwh": 5, "comp_departure_eur_per_kwh": 0.02,
     "comp_interim": [{"checkpoint": 4, "eur_per_kwh": 0.01}]},
    {"kind": "BESS", "id": "b", "capacity_kwh": 50, "p_ch_max_kw": 10, "p_dis_max_kw": 10, "e0_kwh": 25,
     "balance_checkpoints": [2, 4], "comp_up_eur_per_kwh": 0.004, "comp_dn_eur_per_kwh": 0.008,
     "hard_terminal": true},
    {"kind": "HP", "id": "h", "capacitance_kwh_per_k": 10, "conductance_kw_per_k": 0.25, "cop": 3,
     "theta0_k": 293, "theta_amb_k": "amb", "theta_set_k": 293, "rho_up_eur_per_k": 0.0003,
     "rho_dn_eur_per_k": 0.0008, "dtheta_up_max_k": 1, "dtheta_dn_max_k": [1, 1, 2, 2], "p_max_kw": 5},
    {"kind": "PV_CURTAILABLE", "id": "pv", "p_base_kw": -3, "p_lo_kw": -3, "p_hi_kw": 0,
     "c_p_up_eur_per_kw": 0.05, "c_p_dn_eur_per_kw": 0}
  ]
})";

}  // namespace

TEST_CASE("fleet documents cover every DER kind") {
    const Fleet f = parse_fleet(kFleet, {4, 1.0}, "inline");
    REQUIRE(f.ders.size() == 4);
    CHECK(f.labels[2] == "h");
    CHECK(f.ders[0].kind == DerKind::EV);
    CHECK(f.ders[0].c_e_dn(3) == doctest::Approx(0.01));
    CHECK(f.ders[1].e_offset == 25.0);
    CHECK(f.ders[1].c_e_up(1) == doctest::Approx(0.004));
    CHECK(f.ders[1].c_e_up(3) == doctest::Approx(0.008));
    CHECK(f.ders[2].e_hi(2) > f.ders[2].e_base({4, 1.0})(2));
    CHECK(f.ders[3].c_p_up(0) == doctest::Approx(0.05));
}

TEST_CASE("fleet documents are checked strictly") {
    std::string bad = kFleet;
    bad.replace(bad.find("\"p_max_kw\""), 10, "\"p_max_kW\"");
    CHECK_THROWS_WITH_AS(parse_fleet(bad, {4, 1.0}, "inline"), doctest::Contains("p_max_kW"), Error);
    CHECK_THROWS_AS(parse_fleet(kFleet, {5, 1.0}, "inline"), Error);
    CHECK_THROWS_AS(parse_fleet(kFleet, {4, 0.5}, "inline"), Error);
    std::string shortp = kFleet;
    shortp.replace(shortp.find("[1, 1, 2, 2]"), 12, "[1, 1, 2]");
    CHECK_THROWS_AS(parse_fleet(shortp, {4, 1.0}, "inline"), Error);
    CHECK_THROWS_AS(parse_fleet("{not json", {4, 1.0}, "inline"), Error);
}

TEST_CASE("price tables convert per-MWh to per-kWh") {
    const fs::path dir = scratch("prices");
    std::ofstream(dir / "p.csv") << "# comment\nslot,c_energy_eur_per_mwh,c_ru_eur_per_mw,c_rd_eur_per_mw\n"
                                    "0,60,12,14\n1,70,12,14\n";
    const TsoPrices p = load_prices((dir / "p.csv").string(), {2, 1.0}, 1e-3, 1e-3);
    CHECK(p.c_energy(1) == doctest::Approx(0.07));
    CHECK(p.c_rd(0) == doctest::Approx(0.014));
    CHECK_THROWS_AS(load_prices((dir / "p.csv").string(), {3, 1.0}, 1e-3, 1e-3), Error);
}

TEST_CASE("shipped scenarios validate") {
    const PreparedScenario p = prepare(load_scenario(testing::data_path("ieee33/scenario.json")), false);
    CHECK(p.fleets.size() == 32);
    CHECK(p.bids.empty());
    CHECK(p.scenario.time.T == 24);
    std::size_t ders = 0;
    for (const Fleet& f : p.fleets) ders += f.ders.size();
    CHECK(ders == 32 * 61);
    CHECK(p.aggregator_index("A18") >= 0);
    CHECK_THROWS_AS(p.aggregator_index("nobody"), Error);

    const PreparedScenario tight = prepare(load_scenario(testing::data_path("ieee33/scenario_tight.json")), false);
    CHECK(tight.grid.v_lo[17] == doctest::Approx(0.954626 * 0.954626));
    CHECK(tight.grid.v_lo[16] == doctest::Approx(kDefaultVlo));
}

TEST_CASE("reports are byte-identical across runs and recomputable from the solution") {
    const Scenario sc = load_scenario(testing::data_path("same_node/scenario.json"));
    const fs::path a = scratch("run_a"), b = scratch("run_b");
    const PreparedScenario p1 = prepare(sc);
    const RunResult r1 = run(p1);
    write_run_reports(p1, r1, a.string());
    const PreparedScenario p2 = prepare(sc);
    write_run_reports(p2, run(p2), b.string());
    int files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        CHECK_MESSAGE(slurp(e.path()) == slurp(b / e.path().filename()), e.path().filename().string());
    }
    CHECK(files == 10);

    const MarketSolution& s = r1.solution;
    const TsoPrices& pr = p1.prices;
    const Eigen::VectorXd& x = s.lp_solution.primal;
    const int T = 24;
    CHECK(s.C_Energy == doctest::Approx(pr.c_energy.dot(x.segment(s.lp.P0_ref, T))));
    CHECK(s.R_Capacity == doctest::Approx(pr.c_ru.dot(x.segment(s.lp.R_up, T)) + pr.c_rd.dot(x.segment(s.lp.R_dn, T))));
    CHECK(s.lp_solution.objective == doctest::Approx(s.C_net).epsilon(1e-9));
}

TEST_CASE("a sweep at beta one reproduces the single run") {
    const PreparedScenario p = prepare(load_scenario(testing::data_path("same_node/scenario.json")));
    const RunResult r = run(p);
    const std::vector<SweepRow> all = sweep_beta(p, SweepMode::All, -1, {1.0});
    REQUIRE(all.size() == 1);
    REQUIRE(all[0].ok);
    CHECK(all[0].C_net == doctest::Approx(r.solution.C_net).epsilon(1e-12));
    CHECK(all[0].C_Flexibility == doctest::Approx(r.solution.C_Flexibility).epsilon(1e-12));
    const int h = p.aggregator_index("EV17");
    const std::vector<SweepRow> one = sweep_beta(p, SweepMode::Single, h, {1.0});
    REQUIRE(one[0].ok);
    CHECK(one[0].payment == doctest::Approx(r.solution.aggregators[h].payment).epsilon(1e-12));
    CHECK(one[0].true_cost == doctest::Approx(r.solution.aggregators[h].bid_cost).epsilon(1e-12));

    const fs::path dir = scratch("sweep");
    write_sweep_report(p, SweepMode::Single, h, one, dir.string());
    CHECK(fs::exists(dir / "sweep_single.csv"));
    CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("report numbers use a fixed format") {
    CHECK(fmt(-0.0) == "0");
    CHECK(fmt(0.1) == "0.1");
    CHECK(fmt(1.0 / 3.0) == "0.333333333333");
}
