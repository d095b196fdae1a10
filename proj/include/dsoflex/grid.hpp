#ifndef DSOFLEX_GRID_HPP
#define DSOFLEX_GRID_HPP

#include "dsoflex/common.hpp"
#include "dsoflex/lp.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace dsoflex {

struct Line {
    int from = 0;  ///< parent after orientation
    int to = 0;
    double r_pu = 0.0;
    double x_pu = 0.0;
};

/// Radial network rooted at node 0. Lines are oriented parent -> child and
/// line k never precedes the line feeding its parent.
struct GridModel {
    int num_nodes = 1;
    double s_base_kva = 1000.0;
    std::vector<Line> lines;
    std::vector<double> v_lo, v_hi;     ///< squared p.u., per node (root entries unused)
    std::vector<Profile> p_fix, q_fix;  ///< kW / kvar, per node
    std::vector<int> parent_line;       ///< per node, -1 at the root
    std::vector<std::vector<int>> child_lines;

    int T() const { return p_fix.empty() ? 0 : static_cast<int>(p_fix[0].size()); }
};

inline constexpr double kDefaultVlo = 0.95 * 0.95;
inline constexpr double kDefaultVhi = 1.05 * 1.05;

/// Orients lines away from the root and fills parent/child tables.
/// Throws on cycles, duplicate lines, disconnected nodes and non-positive impedance.
void finalize_topology(GridModel& grid, Warnings* warnings = nullptr);

/// Reads the sectioned text format (see docs/schema.md). `origin` prefixes messages.
GridModel load_grid(std::istream& in, const TimeGrid& time, const std::string& origin = "grid",
                    Warnings* warnings = nullptr);
GridModel load_grid_file(const std::string& path, const TimeGrid& time, Warnings* warnings = nullptr);

/// Flexible injection attached to a node for LP emission.
struct Attachment {
    int node = 0;
    double tan_gamma = 0.0;
};

/// LP column and row handles of one reserve scenario. Every handle `h` names a
/// block of T consecutive entries h, h+1, ..., h+T-1.
struct ScenarioVars {
    std::string name;
    int T = 0;
    int P0 = -1;
    std::vector<int> P_line, Q_line;  ///< per line
    std::vector<int> V;               ///< per node
    std::vector<int> P_h, Q_h;        ///< per attachment; Q_h = -1 at the root
    std::vector<int> v_lo_row, v_hi_row;  ///< per node, -1 when absent
    int first_row = 0, end_row = 0;

    int col(int handle, int t) const { return handle + t; }
};

struct LinDistFlowOptions {
    bool ignore_voltage = false;
};

/// Adds LinDistFlow balance, voltage-drop, root voltage, voltage-limit and
/// power-factor constraints for one scenario. Aggregator powers are free columns.
ScenarioVars emit_lindistflow(const GridModel& grid, lp::Builder& lp, const std::string& scenario,
                              const std::vector<Attachment>& attachments,
                              const LinDistFlowOptions& options = {});

}  // namespace dsoflex

#endif  // DSOFLEX_GRID_HPP
