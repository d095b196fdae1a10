#ifndef DSOFLEX_COMMON_HPP
#define DSOFLEX_COMMON_HPP

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace dsoflex {

/// Per-slot profile (kW, kWh or EUR per unit, depending on context).
using Profile = Eigen::VectorXd;

/// Thrown for malformed inputs and violated preconditions.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-fatal findings collected by builders (e.g. unusual coefficient orderings).
using Warnings = std::vector<std::string>;

/// Uniform discretisation of the scheduling horizon.
struct TimeGrid {
    int T = 24;       ///< number of slots
    double dt = 1.0;  ///< slot length in hours

    void validate() const {
        if (T < 1) throw Error("TimeGrid: T must be >= 1");
        if (!(dt > 0.0)) throw Error("TimeGrid: dt must be > 0");
    }

    void check_length(const Profile& p, const std::string& what) const {
        if (p.size() != T)
            throw Error(what + ": expected length " + std::to_string(T) + ", got " +
                        std::to_string(p.size()));
    }
};

// Absolute tolerance for construction-time feasibility checks.
inline constexpr double kFeasTol = 1e-9;

}  // namespace dsoflex

#endif  // DSOFLEX_COMMON_HPP
