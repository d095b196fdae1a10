#ifndef DSOFLEX_DER_FLEX_HPP
#define DSOFLEX_DER_FLEX_HPP

#include "dsoflex/common.hpp"
#include "dsoflex/thermal.hpp"

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace dsoflex {

enum class DerKind { EV, BESS, HP, PV_CURTAILABLE };

std::string_view to_string(DerKind kind);
DerKind der_kind_from_string(std::string_view name);

/// Power-energy boundary model of one DER plus its flexibility cost coefficients.
///
/// Power is consumption-positive. The accumulated energy trajectory is
/// e_t = e_offset + dt * sum_{tau<=t} p_tau; e_offset is zero except for storage,
/// whose bounds are expressed as state of charge.
struct DerSpec {
    DerKind kind = DerKind::PV_CURTAILABLE;
    Profile p_base, p_lo, p_hi;  ///< kW
    Profile e_lo, e_hi;          ///< kWh
    Profile c_p_up, c_p_dn;      ///< EUR/kW
    Profile c_e_up, c_e_dn;      ///< EUR/kWh
    double e_offset = 0.0;       ///< kWh

    Profile e_base(const TimeGrid& grid) const;
    /// Energy trajectory of an arbitrary power profile in this DER's frame.
    Profile energy(const Profile& p, const TimeGrid& grid) const;
};

/// Checks lengths, p_lo <= p_base <= p_hi, e_lo <= e_base <= e_hi and c >= 0.
void validate(const DerSpec& spec, const TimeGrid& grid);

/// True if p satisfies the DER's power and energy bounds within tol.
bool is_feasible(const DerSpec& spec, const Profile& p, const TimeGrid& grid,
                 double tol = kFeasTol);

struct ActivatedRanges {
    Profile dp_up, dp_dn;  ///< kW
    Profile de_up, de_dn;  ///< kWh

    static ActivatedRanges zero(int T);
};

/// c_p_up'dp_up + c_p_dn'dp_dn + c_e_up'de_up + c_e_dn'de_dn, in EUR.
double flexibility_cost(const DerSpec& spec, const ActivatedRanges& act, const TimeGrid& grid);

struct EvParams {
    double capacity_kwh = 0;  ///< upper bound on energy charged over the session
    double p_rated_kw = 0;
    int arrive_slot = 0;      ///< first plugged-in slot
    int depart_slot = 0;      ///< first slot after departure (exclusive), <= T
    double e_expected_kwh = 0;
    double e_min_kwh = 0;
    double comp_departure = 0;                        ///< EUR/kWh unmet at departure
    std::vector<std::pair<int, double>> comp_interim;  ///< (1-based checkpoint, EUR/kWh)
};

DerSpec build_ev_spec(const EvParams& ev, const TimeGrid& grid);

struct BessParams {
    double capacity_kwh = 0;
    double p_ch_max_kw = 0;
    double p_dis_max_kw = 0;
    double e0_kwh = 0;
    std::vector<int> balance_slots;  ///< 1-based, strictly increasing, within [1, T]
    double comp_up = 0;              ///< EUR/kWh surplus at a balancing time
    double comp_dn = 0;              ///< EUR/kWh deficit at a balancing time
    /// Used when T is a balance slot; default is twice the interim value.
    std::optional<double> terminal_comp_up, terminal_comp_dn;
    bool hard_terminal = false;
};

/// Idle baseline at e0. Emits a warning (not an error) when comp_dn < comp_up.
DerSpec build_bess_spec(const BessParams& bess, const TimeGrid& grid, Warnings* warnings = nullptr);

/// Maps temperature-range limits and compensations to energy bounds and coefficients.
/// Warns when the set-point baseline leaves [0, p_max]; throws when (D^-1)' rho < 0.
DerSpec build_hp_spec(const HpThermalSpec& hp, double p_max_kw, const TimeGrid& grid,
                      Warnings* warnings = nullptr);

/// Curtailable PV or load: power-range costs only.
DerSpec make_curtailable_spec(Profile p_base, Profile p_lo, Profile p_hi, Profile c_p_up,
                              Profile c_p_dn, const TimeGrid& grid);

}  // namespace dsoflex

#endif  // DSOFLEX_DER_FLEX_HPP
