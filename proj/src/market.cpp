#include "dsoflex/market.hpp"

#include <algorithm>
#include <cmath>

namespace dsoflex {

void TsoPrices::validate(const TimeGrid& grid) const {
    grid.check_length(c_energy, "prices.c_energy");
    grid.check_length(c_ru, "prices.c_ru");
    grid.check_length(c_rd, "prices.c_rd");
    if (!c_energy.allFinite() || !c_ru.allFinite() || !c_rd.allFinite())
        throw Error("prices: non-finite entry");
    if ((c_ru.array() < 0).any() || (c_rd.array() < 0).any())
        throw Error("prices: reserve prices must be >= 0");
}

namespace {

void check_inputs(const GridModel& grid, const std::vector<AggregatorBid>& bids, const TimeGrid& time) {
    time.validate();
    if (grid.T() != time.T) throw Error("market: grid profiles do not match the time grid");
    for (const AggregatorBid& b : bids) {
        b.validate();
        if (b.region.slots() != time.T) throw Error("market: bid " + b.id + " has the wrong horizon");
        if (b.node < 0 || b.node >= grid.num_nodes)
            throw Error("market: bid " + b.id + " sits at unknown node " + std::to_string(b.node));
    }
}

std::vector<Attachment> attachments(const std::vector<AggregatorBid>& bids) {
    std::vector<Attachment> att;
    for (const AggregatorBid& b : bids) att.push_back({b.node, std::tan(b.power_factor_angle_rad)});
    return att;
}

Profile block(const Eigen::VectorXd& v, int start, int n) { return v.segment(start, n); }

}  // namespace

MarketLp build_market_lp(const GridModel& grid, const std::vector<AggregatorBid>& bids,
                         const TsoPrices& prices, const TimeGrid& time, const MarketOptions& options) {
    check_inputs(grid, bids, time);
    prices.validate(time);
    const int T = time.T;
    lp::Builder b;
    MarketLp out;
    out.P0_ref = b.add_columns("P0ref", T, -lp::kInf, lp::kInf);
    out.R_up = b.add_columns("Rup", T, 0.0, lp::kInf);
    out.R_dn = b.add_columns("Rdn", T, 0.0, lp::kInf);
    for (int t = 0; t < T; ++t) {
        b.set_cost(out.P0_ref + t, time.dt * prices.c_energy(t));
        b.set_cost(out.R_up + t, -prices.c_ru(t));
        b.set_cost(out.R_dn + t, -prices.c_rd(t));
    }
    const std::vector<Attachment> att = attachments(bids);
    const LinDistFlowOptions lo{options.ignore_voltage};
    out.ru = emit_lindistflow(grid, b, "ru", att, lo);
    out.rd = emit_lindistflow(grid, b, "rd", att, lo);
    for (int t = 0; t < T; ++t) {
        const std::string st = "_" + std::to_string(t);
        b.add_row("link_ru" + st, {{out.ru.P0 + t, 1.0}, {out.P0_ref + t, -1.0}, {out.R_up + t, 1.0}},
                  lp::Sense::Equal, 0.0);
        b.add_row("link_rd" + st, {{out.rd.P0 + t, 1.0}, {out.P0_ref + t, -1.0}, {out.R_dn + t, -1.0}},
                  lp::Sense::Equal, 0.0);
    }

    for (std::size_t h = 0; h < bids.size(); ++h) {
        const AggregatorBid& bid = bids[h];
        const FlexRegion& r = bid.region;
        const int M = r.rows();
        MarketLp::BidHandles hd;
        const std::string tag = bid.id + "_";
        hd.dphi_up = b.num_cols();
        for (int m = 0; m < M; ++m)
            b.add_column(tag + "dphi_up_" + std::to_string(m), 0.0,
                         std::max(0.0, r.phi_hi(m) - r.traj_base(m)), bid.c_up(m));
        hd.dphi_dn = b.num_cols();
        for (int m = 0; m < M; ++m)
            b.add_column(tag + "dphi_dn_" + std::to_string(m), 0.0,
                         std::max(0.0, r.traj_base(m) - r.phi_lo(m)), bid.c_dn(m));
        const auto envelope = [&](const ScenarioVars& sv, bool up) {
            const int first = b.num_rows();
            for (int m = 0; m < M; ++m) {
                std::vector<lp::Term> terms;
                for (int t = 0; t < T; ++t)
                    if (r.U(m, t) != 0.0) terms.push_back({sv.P_h[h] + t, r.scale(m)});
                terms.push_back({(up ? hd.dphi_up : hd.dphi_dn) + m, up ? -1.0 : 1.0});
                b.add_row(tag + (up ? "env_up_" : "env_dn_") + sv.name + "_" + std::to_string(m),
                          std::move(terms), up ? lp::Sense::LessEqual : lp::Sense::GreaterEqual,
                          r.traj_base(m));
            }
            return first;
        };
        hd.env_up_ru = envelope(out.ru, true);
        hd.env_dn_ru = envelope(out.ru, false);
        hd.env_up_rd = envelope(out.rd, true);
        hd.env_dn_rd = envelope(out.rd, false);
        out.bids.push_back(hd);
    }
    out.problem = std::move(b).build();
    return out;
}

Profile baseline_root_profile(const GridModel& grid, const std::vector<AggregatorBid>& bids,
                              const TimeGrid& time, const MarketOptions& options) {
    check_inputs(grid, bids, time);
    lp::Builder b;
    const ScenarioVars sv = emit_lindistflow(grid, b, "base", attachments(bids), {options.ignore_voltage});
    for (std::size_t h = 0; h < bids.size(); ++h)
        for (int t = 0; t < time.T; ++t)
            b.set_bounds(sv.P_h[h] + t, bids[h].region.p_base(t), bids[h].region.p_base(t));
    const lp::Solution s = lp::solve(std::move(b).build(), options.solver);
    if (!s.optimal())
        throw Error(std::string("baseline operating point is not network-feasible (") +
                    lp::to_string(s.status) + "); check fixed loads and voltage limits");
    return block(s.primal, sv.P0, time.T);
}

MarketSolution clear_market(const GridModel& grid, const std::vector<AggregatorBid>& bids,
                            const TsoPrices& prices, const TimeGrid& time, const MarketOptions& options) {
    MarketSolution out;
    out.ignore_voltage = options.ignore_voltage;
    out.dt = time.dt;
    try {
        out.P0_base = baseline_root_profile(grid, bids, time, options);
    } catch (const Error& e) {
        out.status = lp::Status::Infeasible;
        out.message = std::string("baseline: ") + e.what();
        return out;
    }
    out.lp = build_market_lp(grid, bids, prices, time, options);
    out.lp_solution = lp::solve(out.lp.problem, options.solver);
    out.status = out.lp_solution.status;
    if (!out.optimal()) {
        out.message = std::string("clearing LP: ") + lp::to_string(out.status) + " (" +
                      out.lp_solution.message + ")";
        return out;
    }

    const int T = time.T;
    const Eigen::VectorXd& x = out.lp_solution.primal;
    const Eigen::VectorXd& y = out.lp_solution.row_dual;
    out.P0_ref = block(x, out.lp.P0_ref, T);
    out.R_up = block(x, out.lp.R_up, T);
    out.R_dn = block(x, out.lp.R_dn, T);
    out.P0_ru = block(x, out.lp.ru.P0, T);
    out.P0_rd = block(x, out.lp.rd.P0, T);
    out.C_Base = time.dt * prices.c_energy.dot(out.P0_base);
    out.C_Energy = time.dt * prices.c_energy.dot(out.P0_ref);
    out.R_Capacity = prices.c_ru.dot(out.R_up) + prices.c_rd.dot(out.R_dn);

    for (std::size_t h = 0; h < bids.size(); ++h) {
        const MarketLp::BidHandles& hd = out.lp.bids[h];
        const int M = bids[h].region.rows();
        AggregatorResult a;
        a.id = bids[h].id;
        // Clip solver round-off below the zero bound.
        a.ranges.dphi_up = block(x, hd.dphi_up, M).cwiseMax(0.0);
        a.ranges.dphi_dn = block(x, hd.dphi_dn, M).cwiseMax(0.0);
        a.dual_up_ru = block(y, hd.env_up_ru, M);
        a.dual_dn_ru = block(y, hd.env_dn_ru, M);
        a.dual_up_rd = block(y, hd.env_up_rd, M);
        a.dual_dn_rd = block(y, hd.env_dn_rd, M);
        a.mfp_up = a.dual_up_ru + a.dual_up_rd;
        a.mfp_dn = a.dual_dn_ru + a.dual_dn_rd;
        a.P_ru = block(x, out.lp.ru.P_h[h], T);
        a.P_rd = block(x, out.lp.rd.P_h[h], T);
        a.payment = a.mfp_up.dot(a.ranges.dphi_up) + a.mfp_dn.dot(a.ranges.dphi_dn);
        a.bid_cost = bids[h].c_up.dot(a.ranges.dphi_up) + bids[h].c_dn.dot(a.ranges.dphi_dn);
        out.C_Flexibility += a.bid_cost;
        out.aggregators.push_back(std::move(a));
    }
    out.C_net = out.C_Energy - out.R_Capacity + out.C_Flexibility;

    for (const ScenarioVars* sv : {&out.lp.ru, &out.lp.rd})
        for (int i = 1; i < grid.num_nodes; ++i)
            for (int first : {sv->v_lo_row[i], sv->v_hi_row[i]})
                if (first >= 0)
                    out.max_voltage_dual = std::max(out.max_voltage_dual, y.segment(first, T).cwiseAbs().maxCoeff());
    return out;
}

SettlementReport settle(const MarketSolution& s) {
    if (!s.optimal()) throw Error("settle: market solution is not optimal");
    SettlementReport r;
    for (const AggregatorResult& a : s.aggregators) {
        r.payments.push_back(a.payment);
        r.sum_payments += a.payment;
    }
    r.lhs = s.C_Base - s.C_Energy + s.R_Capacity;
    r.surplus = r.lhs - r.sum_payments;
    r.max_voltage_dual = s.max_voltage_dual;
    r.voltage_binding = s.max_voltage_dual > 1e-8;
    return r;
}

namespace {

bool same_bid(const AggregatorBid& a, const AggregatorBid& b) {
    const auto close = [](const Profile& u, const Profile& v) {
        return u.size() == v.size() && (u - v).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + u.cwiseAbs().maxCoeff());
    };
    return a.node == b.node && a.region.U == b.region.U && close(a.region.phi_lo, b.region.phi_lo) &&
           close(a.region.phi_hi, b.region.phi_hi) && close(a.region.traj_base, b.region.traj_base) &&
           close(a.c_up, b.c_up) && close(a.c_dn, b.c_dn);
}

}  // namespace

std::vector<KktAggregatorReport> kkt_report(const MarketSolution& s, const std::vector<AggregatorBid>& bids,
                                            double tol) {
    if (!s.optimal()) throw Error("kkt_report: market solution is not optimal");
    if (bids.size() != s.aggregators.size()) throw Error("kkt_report: bid list does not match the solution");
    std::vector<KktAggregatorReport> out;
    for (std::size_t h = 0; h < bids.size(); ++h) {
        const AggregatorBid& bid = bids[h];
        const AggregatorResult& a = s.aggregators[h];
        const FlexRegion& r = bid.region;
        KktAggregatorReport rep;
        rep.id = bid.id;
        for (std::size_t g = 0; g < bids.size(); ++g)
            if (g != h && same_bid(bid, bids[g])) {
                rep.degenerate = true;
                rep.note = "duplicate of " + bids[g].id + "; activation split and duals are not unique";
            }
        for (int m = 0; m < r.rows(); ++m) {
            const double ub_up = std::max(0.0, r.phi_hi(m) - r.traj_base(m));
            const double ub_dn = std::max(0.0, r.traj_base(m) - r.phi_lo(m));
            const auto check = [&](bool up, double act, double ub, double mfp, double c) {
                const double eps = tol * (1.0 + ub);
                if (act > eps && act < ub - eps) {
                    KktRow row{m, up, act, mfp, c, std::abs(mfp - c)};
                    rep.max_residual = std::max(rep.max_residual, row.residual);
                    rep.interior_rows.push_back(row);
                }
            };
            check(true, a.ranges.dphi_up(m), ub_up, a.mfp_up(m), bid.c_up(m));
            check(false, a.ranges.dphi_dn(m), ub_dn, a.mfp_dn(m), bid.c_dn(m));
        }
        if (rep.degenerate) rep.max_residual = 0.0;
        out.push_back(std::move(rep));
    }
    return out;
}

AggregatorBid scale_bid(const AggregatorBid& bid, double beta) {
    if (!(beta >= 0) || !std::isfinite(beta)) throw Error("scale_bid: beta must be finite and >= 0");
    AggregatorBid b = bid;
    b.c_up *= beta;
    b.c_dn *= beta;
    return b;
}

}  // namespace dsoflex
