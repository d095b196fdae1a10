#ifndef DSOFLEX_TESTS_TOYS_HPP
#define DSOFLEX_TESTS_TOYS_HPP

#include "dsoflex/grid.hpp"
#include "dsoflex/market.hpp"
#include "support.hpp"

namespace testing {

using namespace dsoflex;

inline GridModel single_node_grid(int T) {
    GridModel g;
    g.num_nodes = 1;
    g.v_lo = {kDefaultVlo};
    g.v_hi = {kDefaultVhi};
    g.p_fix = g.q_fix = {Profile::Zero(T)};
    finalize_topology(g);
    return g;
}

/// Root plus one load node behind a single line; v_lo is squared p.u.
inline GridModel two_node_grid(int T, double p_fix_kw, double v_lo_sq, double r_pu = 0.01, double x_pu = 0.01) {
    GridModel g;
    g.num_nodes = 2;
    g.s_base_kva = 1000.0;
    g.lines = {{0, 1, r_pu, x_pu}};
    g.v_lo = {kDefaultVlo, v_lo_sq};
    g.v_hi = {kDefaultVhi, kDefaultVhi};
    g.p_fix = {Profile::Zero(T), Profile::Constant(T, p_fix_kw)};
    g.q_fix = {Profile::Zero(T), Profile::Zero(T)};
    finalize_topology(g);
    return g;
}

/// Bid with one power row per slot: base - dn_room <= P_t <= base + up_room.
inline AggregatorBid power_bid(const std::string& id, int node, int T, double base, double dn_room,
                               double up_room, double c_up, double c_dn) {
    FlexRegion r;
    r.U = Eigen::MatrixXd::Identity(T, T);
    r.scale = Profile::Ones(T);
    r.p_base = Profile::Constant(T, base);
    r.traj_base = r.p_base;
    r.phi_lo = Profile::Constant(T, base - dn_room);
    r.phi_hi = Profile::Constant(T, base + up_room);
    for (int t = 0; t < T; ++t) r.row_kind.push_back({RowKind::Power, t});
    return make_bid(id, node, 1.0, r, Profile::Constant(T, c_up), Profile::Constant(T, c_dn));
}

inline TsoPrices flat_prices(int T, double c_energy, double c_ru, double c_rd) {
    return {Profile::Constant(T, c_energy), Profile::Constant(T, c_ru), Profile::Constant(T, c_rd)};
}

struct Toy {
    GridModel grid;
    std::vector<AggregatorBid> bids;
    TsoPrices prices;
    TimeGrid time{1, 1.0};
};

/// Single node, one slot, one power-row aggregator with random data (11 LP columns).
inline Toy random_toy(std::mt19937_64& rng) {
    Toy t;
    t.grid = single_node_grid(1);
    t.bids = {power_bid("A", 0, 1, uniform(rng, -5, 5), uniform(rng, 0, 3), uniform(rng, 0, 3), uniform(rng, 0, 2),
                        uniform(rng, 0, 2))};
    t.prices = flat_prices(1, uniform(rng, -1, 2), uniform(rng, 0, 2), uniform(rng, 0, 2));
    return t;
}

/// Two nodes, one slot; downward-reserve revenue pushes the load up until the
/// lower voltage limit binds halfway into the upward range.
inline Toy binding_voltage_toy(double c_up = 0.5) {
    Toy t;
    // V1 = 1 - 2 r P / S_base: total node load 200 kW reaches 0.996.
    t.grid = two_node_grid(1, 100.0, 0.996);
    t.bids = {power_bid("A", 1, 1, 50.0, 50.0, 100.0, c_up, 5.0)};
    t.prices = flat_prices(1, 0.1, 0.0, 2.0);
    return t;
}

}  // namespace testing

#endif  // DSOFLEX_TESTS_TOYS_HPP
