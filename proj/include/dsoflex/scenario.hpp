#ifndef DSOFLEX_SCENARIO_HPP
#define DSOFLEX_SCENARIO_HPP

#include "dsoflex/aggregation.hpp"
#include "dsoflex/der_flex.hpp"
#include "dsoflex/grid.hpp"
#include "dsoflex/market.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dsoflex {

struct Fleet {
    std::vector<std::string> labels;
    std::vector<DerSpec> ders;
};

/// Parses a fleet document; T and dt in the document must match `time`.
Fleet load_fleet(const std::string& path, const TimeGrid& time, Warnings* warnings = nullptr);
Fleet parse_fleet(const std::string& text, const TimeGrid& time, const std::string& origin,
                  Warnings* warnings = nullptr);

/// Price table in per-MWh / per-MW units, scaled to per-kWh / per-kW on load.
TsoPrices load_prices(const std::string& path, const TimeGrid& time, double energy_scale,
                      double reserve_scale);

struct AggregatorEntry {
    std::string id;
    int node = 0;
    std::string fleet;
    double power_factor = 1.0;
};

struct VoltageOverride {
    int node = 0;
    std::optional<double> v_lo, v_hi;  ///< magnitudes, p.u.
};

struct ScenarioOptions {
    bool ignore_voltage = false;
    double shrink = 0.0;
    std::vector<double> betas{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
    std::uint64_t seed = 1;
    int random_probes = 8;
    std::string single_aggregator;
};

struct Scenario {
    std::string name;
    std::string path;  ///< scenario file; relative references resolve against its directory
    TimeGrid time;
    std::string grid;
    std::string prices;
    double energy_price_scale = 1e-3;
    double reserve_price_scale = 1e-3;
    std::vector<AggregatorEntry> aggregators;
    std::vector<VoltageOverride> voltage_overrides;
    ScenarioOptions options;
};

Scenario load_scenario(const std::string& path);

/// Everything needed to clear the market: parsed inputs plus certified bids.
struct PreparedScenario {
    Scenario scenario;
    GridModel grid;
    TsoPrices prices;
    std::vector<Fleet> fleets;
    std::vector<AggregatorBid> bids;
    std::vector<InnerReport> inner;
    Warnings warnings;

    int aggregator_index(const std::string& id) const;
};

/// Loads and cross-validates all referenced files. With `build_bids` false the
/// fleets are parsed and checked but no region is certified.
PreparedScenario prepare(const Scenario& scenario, bool build_bids = true);

struct RunResult {
    MarketSolution solution;
    SettlementReport settlement;
    std::vector<KktAggregatorReport> kkt;
};

MarketOptions market_options(const Scenario& scenario);
RunResult run(const PreparedScenario& prepared);

enum class SweepMode { All, Single };

struct SweepRow {
    double beta = 1.0;
    bool ok = false;
    std::string message;
    double C_net = 0, C_Flexibility = 0;
    double payment = 0, true_cost = 0, profit = 0;  ///< SINGLE mode only
};

/// ALL scales every bid by beta; SINGLE scales only bid `single` and evaluates its
/// profit against the unscaled coefficients. Failed points are flagged, not thrown.
std::vector<SweepRow> sweep_beta(const PreparedScenario& prepared, SweepMode mode, int single,
                                 const std::vector<double>& betas);

/// Writes the run tables and manifest into `dir` (created if missing).
void write_run_reports(const PreparedScenario& prepared, const RunResult& result, const std::string& dir);
void write_sweep_report(const PreparedScenario& prepared, SweepMode mode, int single,
                        const std::vector<SweepRow>& rows, const std::string& dir);

/// Fixed-format number used by every report.
std::string fmt(double v);

}  // namespace dsoflex

#endif  // DSOFLEX_SCENARIO_HPP
