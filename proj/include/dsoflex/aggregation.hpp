#ifndef DSOFLEX_AGGREGATION_HPP
#define DSOFLEX_AGGREGATION_HPP

#include "dsoflex/common.hpp"
#include "dsoflex/der_flex.hpp"
#include "dsoflex/lp.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace dsoflex {

enum class RowKind { Power, Energy, Other };

struct RowTag {
    RowKind kind = RowKind::Other;
    int t = -1;  ///< slot index for Power/Energy rows
};

/// Aggregated flexibility region { P : phi_lo <= scale .* (U P) <= phi_hi }.
///
/// Default layout has 2T rows: power rows 0..T-1 (scale 1, kW), then energy rows
/// T..2T-1 holding prefix indicators (scale dt, kWh). Energy rows are offset-free:
/// storage initial charge is subtracted from the per-DER bounds before summing.
struct FlexRegion {
    Eigen::MatrixXd U;        ///< M x T, entries in {0,1}
    Profile scale;            ///< M
    Profile phi_lo, phi_hi;   ///< M
    Profile traj_base;        ///< M, scale .* (U p_base)
    Profile p_base;           ///< T, aggregate baseline power
    std::vector<RowTag> row_kind;

    int rows() const { return static_cast<int>(U.rows()); }
    int slots() const { return static_cast<int>(U.cols()); }
    Profile trajectory(const Profile& p) const { return scale.cwiseProduct(U * p); }
    bool contains(const Profile& p, double tol = 1e-7) const;
    void validate() const;
};

struct TrajectoryRanges {
    Profile dphi_up, dphi_dn;
};

struct AggregatorBid {
    std::string id;
    int node = 0;
    double power_factor_angle_rad = 0.0;
    FlexRegion region;
    Profile c_up, c_dn;

    void validate() const;
};

FlexRegion aggregate_outer(const std::vector<DerSpec>& ders, const TimeGrid& grid);

struct InnerOptions {
    std::uint64_t seed = 1;
    int random_probes = 8;     ///< random-direction vertices checked per candidate
    int max_iterations = 30;
    double tolerance = 1e-3;   ///< bisection width on the shrink factor
};

struct InnerReport {
    double shrink = 0.0;       ///< certified factor actually used
    int iterations = 0;        ///< candidate regions tested
    int probes_checked = 0;
};

/// Outer region with energy gaps shrunk toward the baseline by `shrink`, then
/// certified by disaggregating extreme trajectories; the factor is raised by
/// bisection toward 1 until certification passes.
FlexRegion aggregate_inner(const std::vector<DerSpec>& ders, const TimeGrid& grid, double shrink,
                           InnerReport* report = nullptr, const InnerOptions& options = {});

/// Same row layout as the region, with energy rows shrunk; no certification.
FlexRegion shrink_region(const FlexRegion& outer, double shrink);

/// Gap-weighted average of per-DER coefficients; zero total gap gives 0.
std::pair<Profile, Profile> estimate_cost_coeffs(const std::vector<DerSpec>& ders,
                                                 const FlexRegion& region, const TimeGrid& grid);

struct Disaggregation {
    bool feasible = false;
    lp::Status status = lp::Status::Error;
    std::vector<Profile> profiles;  ///< per DER, empty when infeasible
};

enum class DisaggObjective { Feasibility, L1FromBaseline };

/// Splits an aggregate power profile into per-DER feasible profiles.
Disaggregation disaggregate(const std::vector<DerSpec>& ders, const Profile& target,
                            const TimeGrid& grid,
                            DisaggObjective objective = DisaggObjective::L1FromBaseline);

double aggregator_cost(const AggregatorBid& bid, const TrajectoryRanges& ranges);

AggregatorBid make_bid(std::string id, int node, double power_factor, FlexRegion region,
                       Profile c_up, Profile c_dn);

/// Text dump of U (coordinate format) followed by scale, phi_lo, phi_hi, traj_base.
void write_region(const FlexRegion& region, std::ostream& os);

}  // namespace dsoflex

#endif  // DSOFLEX_AGGREGATION_HPP
