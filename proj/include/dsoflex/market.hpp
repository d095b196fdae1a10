#ifndef DSOFLEX_MARKET_HPP
#define DSOFLEX_MARKET_HPP

#include "dsoflex/aggregation.hpp"
#include "dsoflex/common.hpp"
#include "dsoflex/grid.hpp"
#include "dsoflex/lp.hpp"

#include <string>
#include <vector>

namespace dsoflex {

/// Transmission-level prices; the DSO is a price taker.
struct TsoPrices {
    Profile c_energy;  ///< EUR/kWh
    Profile c_ru;      ///< EUR/kW per slot
    Profile c_rd;      ///< EUR/kW per slot

    void validate(const TimeGrid& grid) const;
};

struct MarketOptions {
    bool ignore_voltage = false;
    lp::SolveOptions solver;
};

/// Column and row handles of the clearing LP.
struct MarketLp {
    lp::Problem problem;
    int P0_ref = -1, R_up = -1, R_dn = -1;  ///< blocks of T columns
    ScenarioVars ru, rd;
    struct BidHandles {
        int dphi_up = -1, dphi_dn = -1;  ///< blocks of M columns
        int env_up_ru = -1, env_dn_ru = -1, env_up_rd = -1, env_dn_rd = -1;  ///< blocks of M rows
    };
    std::vector<BidHandles> bids;
};

MarketLp build_market_lp(const GridModel& grid, const std::vector<AggregatorBid>& bids,
                         const TsoPrices& prices, const TimeGrid& time, const MarketOptions& options = {});

/// Root profile with every aggregator held at its baseline; throws when the
/// baseline violates the network limits.
Profile baseline_root_profile(const GridModel& grid, const std::vector<AggregatorBid>& bids,
                              const TimeGrid& time, const MarketOptions& options = {});

struct AggregatorResult {
    std::string id;
    TrajectoryRanges ranges;
    Profile mfp_up, mfp_dn;            ///< summed over both reserve scenarios
    Profile dual_up_ru, dual_up_rd, dual_dn_ru, dual_dn_rd;
    Profile P_ru, P_rd;                ///< aggregator power per scenario
    double payment = 0.0;              ///< mfp_up'dphi_up + mfp_dn'dphi_dn
    double bid_cost = 0.0;             ///< c_up'dphi_up + c_dn'dphi_dn at the bid coefficients
};

struct MarketSolution {
    lp::Status status = lp::Status::Error;
    std::string message;
    Profile P0_base, P0_ref, R_up, R_dn, P0_ru, P0_rd;
    std::vector<AggregatorResult> aggregators;
    double C_Base = 0, C_Energy = 0, R_Capacity = 0, C_Flexibility = 0, C_net = 0;
    double max_voltage_dual = 0.0;  ///< over both scenarios and all limit rows
    bool ignore_voltage = false;
    double dt = 1.0;
    MarketLp lp;
    lp::Solution lp_solution;

    bool optimal() const { return status == lp::Status::Optimal; }
};

/// Builds, solves and post-processes the clearing LP. Infeasible or failed solves
/// return a non-optimal status with a message naming the failing stage.
MarketSolution clear_market(const GridModel& grid, const std::vector<AggregatorBid>& bids,
                            const TsoPrices& prices, const TimeGrid& time,
                            const MarketOptions& options = {});

struct SettlementReport {
    double sum_payments = 0.0;
    double lhs = 0.0;        ///< C_Base - C_Energy + R_Capacity
    double surplus = 0.0;    ///< lhs - sum_payments
    bool voltage_binding = false;
    double max_voltage_dual = 0.0;
    std::vector<double> payments;
};

SettlementReport settle(const MarketSolution& solution);

struct KktRow {
    int row = 0;
    bool upward = true;
    double activation = 0.0;
    double mfp = 0.0;
    double coefficient = 0.0;
    double residual = 0.0;
};

struct KktAggregatorReport {
    std::string id;
    std::vector<KktRow> interior_rows;
    double max_residual = 0.0;
    bool degenerate = false;
    std::string note;
};

/// Stationarity check |mfp - c| on rows whose activation lies strictly inside its bounds.
std::vector<KktAggregatorReport> kkt_report(const MarketSolution& solution,
                                            const std::vector<AggregatorBid>& bids,
                                            double interior_tol = 1e-7);

/// Multiplies both coefficient vectors of a bid by beta.
AggregatorBid scale_bid(const AggregatorBid& bid, double beta);

}  // namespace dsoflex

#endif  // DSOFLEX_MARKET_HPP
