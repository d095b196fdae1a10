#include "dsoflex/aggregation.hpp"
#include "dsoflex/scenario.hpp"
#include "support.hpp"

#include <doctest.h>

#include <set>
#include <sstream>

using namespace dsoflex;
using testing::uniform;

namespace {

DerSpec box(const TimeGrid& g, double lo, double hi, double c_up = 0, double c_dn = 0) {
    return make_curtailable_spec(Profile::Zero(g.T), Profile::Constant(g.T, lo), Profile::Constant(g.T, hi),
                                 Profile::Constant(g.T, c_up), Profile::Constant(g.T, c_dn), g);
}

std::vector<DerSpec> mixed_fleet(std::mt19937_64& rng, const TimeGrid& g, int evs, int hps, int bess) {
    std::vector<DerSpec> out;
    for (int k = 0; k < evs; ++k) {
        const int arrive = static_cast<int>(uniform(rng, 0, g.T / 2));
        const int depart = std::min(g.T, arrive + 3 + static_cast<int>(uniform(rng, 0, g.T / 2)));
        const double p = uniform(rng, 3, 11);
        const double need = uniform(rng, 0.3, 0.9) * p * (depart - arrive) * g.dt;
        out.push_back(build_ev_spec({need * 1.5, p, arrive, depart, need, 0.5 * need, 0.02, {}}, g));
    }
    for (int k = 0; k < hps; ++k) {
        HpThermalSpec hp;
        hp.capacitance = uniform(rng, 8, 12);
        hp.conductance = uniform(rng, 0.2, 0.3);
        hp.cop = uniform(rng, 2.8, 3.2);
        hp.theta_amb = Profile::Constant(g.T, uniform(rng, 273, 283));
        hp.theta_set = Profile::Constant(g.T, 293.0);
        hp.theta0 = 293.0;
        hp.rho_up = Profile::Constant(g.T, 0.004 * hp.conductance / hp.cop);
        hp.rho_dn = Profile::Constant(g.T, 0.01 * hp.conductance / hp.cop);
        hp.dtheta_up_max = hp.dtheta_dn_max = Profile::Ones(g.T);
        out.push_back(build_hp_spec(hp, 6.0, g));
    }
    for (int k = 0; k < bess; ++k)
        out.push_back(build_bess_spec({100, 25, 25, 50, {g.T / 2, g.T}, 0.004, 0.008, {}, {}, true}, g));
    return out;
}

}  // namespace

TEST_CASE("outer region of a single DER is its own boundary model") {
    const TimeGrid g{6, 0.5};
    const DerSpec b = build_bess_spec({100, 20, 30, 40, {3}, 0.004, 0.008, {}, {}, true}, g);
    const FlexRegion r = aggregate_outer({b}, g);
    CHECK(r.rows() == 12);
    CHECK((r.phi_lo.head(6) - b.p_lo).isZero());
    CHECK((r.phi_hi.head(6) - b.p_hi).isZero());
    CHECK((r.phi_lo.tail(6).array() - (b.e_lo.array() - 40)).isZero());
    CHECK((r.phi_hi.tail(6).array() - (b.e_hi.array() - 40)).isZero());
    CHECK(r.scale(7) == 0.5);
    CHECK(r.contains(b.p_base));
}

TEST_CASE("outer power bounds add up") {
    const TimeGrid g{4, 1.0};
    const FlexRegion r = aggregate_outer({box(g, 0, 1), box(g, 0, 2)}, g);
    CHECK(r.phi_lo.head(4).isZero());
    CHECK(r.phi_hi.head(4).isApproxToConstant(3.0));
    CHECK_THROWS_AS(aggregate_outer({}, g), Error);
}

TEST_CASE("grid-sampled Minkowski sums lie in the outer region") {
    std::mt19937_64 rng(31);
    const TimeGrid g{3, 1.0};
    for (int trial = 0; trial < 5; ++trial) {
        const std::vector<DerSpec> fleet = mixed_fleet(rng, g, 1, 1, 1);
        const FlexRegion r = aggregate_outer(fleet, g);
        // Feasible points of each DER on a 6-level grid per slot.
        std::vector<std::vector<Profile>> pts(fleet.size());
        for (std::size_t k = 0; k < fleet.size(); ++k) {
            const DerSpec& d = fleet[k];
            for (int i0 = 0; i0 < 6; ++i0)
                for (int i1 = 0; i1 < 6; ++i1)
                    for (int i2 = 0; i2 < 6; ++i2) {
                        const int idx[3] = {i0, i1, i2};
                        Profile p(3);
                        for (int t = 0; t < 3; ++t) p(t) = d.p_lo(t) + (d.p_hi(t) - d.p_lo(t)) * idx[t] / 5.0;
                        if (is_feasible(d, p, g)) pts[k].push_back(p);
                    }
            pts[k].push_back(d.p_base);
        }
        for (int draw = 0; draw < 400; ++draw) {
            Profile sum = Profile::Zero(3);
            for (const auto& set : pts) sum += set[static_cast<std::size_t>(uniform(rng, 0, set.size() - 1e-9))];
            CHECK(r.contains(sum, 1e-9));
        }
    }
}

TEST_CASE("random per-DER feasible sums satisfy the outer region") {
    std::mt19937_64 rng(37);
    const TimeGrid g{12, 1.0};
    const std::vector<DerSpec> fleet = mixed_fleet(rng, g, 3, 2, 1);
    const FlexRegion r = aggregate_outer(fleet, g);
    int inside = 0;
    for (int draw = 0; draw < 1000; ++draw) {
        Profile sum = Profile::Zero(g.T);
        for (const DerSpec& d : fleet) sum += testing::random_der_point(rng, d, g);
        inside += r.contains(sum, 1e-7);
    }
    CHECK(inside == 1000);
}

TEST_CASE("full shrink collapses energy rows onto the baseline") {
    std::mt19937_64 rng(41);
    const TimeGrid g{8, 1.0};
    const std::vector<DerSpec> fleet = mixed_fleet(rng, g, 2, 2, 1);
    InnerReport rep;
    const FlexRegion r = aggregate_inner(fleet, g, 1.0, &rep);
    CHECK(rep.shrink == 1.0);
    CHECK((r.phi_lo.tail(8) - r.traj_base.tail(8)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((r.phi_hi.tail(8) - r.traj_base.tail(8)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(disaggregate(fleet, r.p_base, g).feasible);
}

TEST_CASE("a single DER certifies without shrinking") {
    std::mt19937_64 rng(43);
    const TimeGrid g{8, 1.0};
    const std::vector<DerSpec> fleet = mixed_fleet(rng, g, 0, 1, 0);
    InnerReport rep;
    const FlexRegion inner = aggregate_inner(fleet, g, 0.0, &rep);
    const FlexRegion outer = aggregate_outer(fleet, g);
    CHECK(rep.shrink == 0.0);
    CHECK(rep.iterations == 1);
    CHECK((inner.phi_lo - outer.phi_lo).isZero());
    CHECK((inner.phi_hi - outer.phi_hi).isZero());
}

TEST_CASE("EVs with disjoint plug-in windows aggregate exactly when the first departure is pinned") {
    const TimeGrid g{8, 1.0};
    const std::vector<DerSpec> fleet = {build_ev_spec({30, 10, 0, 3, 30, 30, 0.02, {}}, g),
                                        build_ev_spec({25, 7, 4, 8, 14, 7, 0.02, {}}, g)};
    InnerReport rep;
    aggregate_inner(fleet, g, 0.0, &rep, {3, 16, 30, 1e-3});
    CHECK(rep.shrink == 0.0);
    CHECK(rep.probes_checked > 0);
}

TEST_CASE("summed prefix-energy bounds are loose once the first EV keeps energy slack") {
    // The first EV may end anywhere in [10, 30] kWh; the summed rows then let the
    // aggregate skip the second EV's 7 kWh minimum.
    const TimeGrid g{8, 1.0};
    const std::vector<DerSpec> fleet = {build_ev_spec({30, 10, 0, 3, 20, 10, 0.02, {}}, g),
                                        build_ev_spec({25, 7, 4, 8, 14, 7, 0.02, {}}, g)};
    const FlexRegion outer = aggregate_outer(fleet, g);
    Profile p = Profile::Zero(8);
    p.head(3).setConstant(10.0);
    CHECK(outer.contains(p));
    CHECK_FALSE(disaggregate(fleet, p, g).feasible);
    InnerReport rep;
    aggregate_inner(fleet, g, 0.0, &rep, {3, 16, 30, 1e-3});
    CHECK(rep.shrink > 0.0);
}

TEST_CASE("shrinking is raised until certification passes") {
    std::mt19937_64 rng(47);
    const TimeGrid g{12, 1.0};
    const std::vector<DerSpec> fleet = mixed_fleet(rng, g, 3, 3, 1);
    InnerReport rep;
    const FlexRegion r = aggregate_inner(fleet, g, 0.0, &rep, {5, 8, 30, 1e-3});
    CHECK(rep.shrink >= 0.0);
    CHECK(rep.shrink <= 1.0);
    CHECK(rep.iterations <= 30);
    std::mt19937_64 pick(53);
    for (int k = 0; k < 100; ++k) {
        const Profile p = testing::random_region_point(pick, r);
        REQUIRE(r.contains(p));
        const Disaggregation d = disaggregate(fleet, p, g);
        CHECK(d.feasible);
    }
}

TEST_CASE("disaggregation returns feasible profiles that sum to the target") {
    std::mt19937_64 rng(59);
    const TimeGrid g{10, 1.0};
    const std::vector<DerSpec> fleet = mixed_fleet(rng, g, 3, 2, 1);
    Profile base = Profile::Zero(g.T);
    for (const DerSpec& d : fleet) base += d.p_base;
    const Disaggregation at_base = disaggregate(fleet, base, g);
    REQUIRE(at_base.feasible);
    for (std::size_t k = 0; k < fleet.size(); ++k)
        CHECK((at_base.profiles[k] - fleet[k].p_base).cwiseAbs().maxCoeff() < 1e-7);

    for (int draw = 0; draw < 20; ++draw) {
        Profile sum = Profile::Zero(g.T);
        for (const DerSpec& d : fleet) sum += testing::random_der_point(rng, d, g);
        const Disaggregation r = disaggregate(fleet, sum, g, DisaggObjective::Feasibility);
        REQUIRE(r.feasible);
        Profile acc = Profile::Zero(g.T);
        for (std::size_t k = 0; k < fleet.size(); ++k) {
            CHECK(is_feasible(fleet[k], r.profiles[k], g, 1e-6));
            acc += r.profiles[k];
        }
        CHECK((acc - sum).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("disaggregation outside the power box is infeasible") {
    const TimeGrid g{3, 1.0};
    const Disaggregation r = disaggregate({box(g, 0, 2)}, Profile::Constant(3, 3.0), g);
    CHECK_FALSE(r.feasible);
    CHECK(r.status == lp::Status::Infeasible);
    CHECK(r.profiles.empty());
}

TEST_CASE("cost coefficients are gap-weighted means") {
    const TimeGrid g{1, 1.0};
    const std::vector<DerSpec> two = {box(g, 0, 1, 2.0, 0), box(g, 0, 3, 4.0, 0)};
    const FlexRegion r = aggregate_outer(two, g);
    const auto [c_up, c_dn] = estimate_cost_coeffs(two, r, g);
    CHECK(c_up(0) == doctest::Approx(3.5));
    CHECK(c_dn(0) == 0.0);

    const std::vector<DerSpec> same = {box(g, -1, 1, 0.3, 0.7), box(g, -2, 5, 0.3, 0.7)};
    const auto [s_up, s_dn] = estimate_cost_coeffs(same, aggregate_outer(same, g), g);
    CHECK(s_up(0) == doctest::Approx(0.3));
    CHECK(s_dn(0) == doctest::Approx(0.7));
}

TEST_CASE("cost coefficients stay within the per-DER range and grow with the costliest gap") {
    std::mt19937_64 rng(61);
    const TimeGrid g{1, 1.0};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<DerSpec> fleet;
        double lo = 1e9, hi = -1e9;
        int costliest = 0;
        for (int k = 0; k < 4; ++k) {
            const double c = uniform(rng, 0, 1);
            if (c > hi) costliest = k;
            lo = std::min(lo, c);
            hi = std::max(hi, c);
            fleet.push_back(box(g, 0, uniform(rng, 0.1, 3), c, 0));
        }
        const auto c0 = estimate_cost_coeffs(fleet, aggregate_outer(fleet, g), g).first(0);
        CHECK(c0 >= lo - 1e-12);
        CHECK(c0 <= hi + 1e-12);
        fleet[costliest].p_hi *= 2;
        const auto c1 = estimate_cost_coeffs(fleet, aggregate_outer(fleet, g), g).first(0);
        CHECK(c1 >= c0 - 1e-12);
    }
}

TEST_CASE("zero-gap rows get zero coefficients") {
    const TimeGrid g{2, 1.0};
    const std::vector<DerSpec> fleet = {box(g, 0, 0, 5.0, 5.0)};
    const auto [c_up, c_dn] = estimate_cost_coeffs(fleet, aggregate_outer(fleet, g), g);
    CHECK(c_up.isZero());
    CHECK(c_dn.isZero());
}

TEST_CASE("shipped fleet prices downward energy highest at compensation times") {
    const TimeGrid g{24, 1.0};
    const Fleet fleet = load_fleet(testing::data_path("ieee33/fleets/agg18.json"), g);
    std::set<int> comp_slots;
    for (const DerSpec& d : fleet.ders)
        if (d.kind == DerKind::EV || d.kind == DerKind::BESS)
            for (int t = 0; t < 24; ++t)
                if (d.c_e_dn(t) > 0) comp_slots.insert(t);
    const FlexRegion r = aggregate_outer(fleet.ders, g);
    const Profile c_dn = estimate_cost_coeffs(fleet.ders, r, g).second.tail(24);
    int argmax = 0;
    c_dn.maxCoeff(&argmax);
    CHECK(comp_slots.count(argmax) == 1);
    // Every slot that beats its neighbours carries an EV or BESS compensation.
    for (int t = 1; t < 23; ++t)
        if (c_dn(t) > 1.5 * c_dn(t - 1) && c_dn(t) > 1.5 * c_dn(t + 1)) CHECK(comp_slots.count(t) == 1);
}

TEST_CASE("aggregator cost is the bid dot product") {
    const TimeGrid g{2, 1.0};
    AggregatorBid bid = make_bid("A", 1, 1.0, aggregate_outer({box(g, -5, 5)}, g), Profile::Zero(4), Profile::Zero(4));
    TrajectoryRanges z{Profile::Zero(4), Profile::Zero(4)};
    CHECK(aggregator_cost(bid, z) == 0.0);
    bid.c_dn(3) = 0.008;
    TrajectoryRanges unit = z;
    unit.dphi_dn(3) = 1.0;
    CHECK(aggregator_cost(bid, unit) == doctest::Approx(0.008));

    std::mt19937_64 rng(67);
    for (int trial = 0; trial < 20; ++trial) {
        bid.c_up = testing::random_profile(rng, 4, 0, 1);
        bid.c_dn = testing::random_profile(rng, 4, 0, 1);
        const TrajectoryRanges r{testing::random_profile(rng, 4, 0, 3), testing::random_profile(rng, 4, 0, 3)};
        double oracle = 0;
        for (int m = 0; m < 4; ++m) oracle += bid.c_up[m] * r.dphi_up[m] + bid.c_dn[m] * r.dphi_dn[m];
        CHECK(aggregator_cost(bid, r) == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("bids reject negative coefficients and bad power factors") {
    const TimeGrid g{2, 1.0};
    const FlexRegion r = aggregate_outer({box(g, -5, 5)}, g);
    CHECK_THROWS_AS(make_bid("A", 1, 1.0, r, -Profile::Ones(4), Profile::Zero(4)), Error);
    CHECK_THROWS_AS(make_bid("A", 1, 0.0, r, Profile::Zero(4), Profile::Zero(4)), Error);
    CHECK(make_bid("A", 1, 0.8, r, Profile::Zero(4), Profile::Zero(4)).power_factor_angle_rad ==
          doctest::Approx(std::acos(0.8)));
}

TEST_CASE("region dump lists U and the bounds") {
    const TimeGrid g{2, 1.0};
    std::ostringstream os;
    write_region(aggregate_outer({box(g, -5, 5)}, g), os);
    const std::string text = os.str();
    CHECK(text.rfind("%%MatrixMarket", 0) == 0);
    CHECK(text.find("4 2 5") != std::string::npos);
}
