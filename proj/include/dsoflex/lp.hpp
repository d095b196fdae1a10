#ifndef DSOFLEX_LP_HPP
#define DSOFLEX_LP_HPP

#include "dsoflex/common.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace dsoflex::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { LessEqual, GreaterEqual, Equal };
enum class Status { Optimal, Infeasible, Unbounded, Error };

const char* to_string(Status s);

struct Column {
    std::string name;
    double lower = 0.0;
    double upper = kInf;
    double cost = 0.0;
};

struct Term {
    int col;
    double coef;
};

struct Row {
    std::string name;
    std::vector<Term> terms;
    Sense sense = Sense::LessEqual;
    double rhs = 0.0;
};

/// Minimisation LP: min c'x s.t. rows, lower <= x <= upper.
struct Problem {
    std::vector<Column> columns;
    std::vector<Row> rows;
    double objective_offset = 0.0;

    int num_cols() const { return static_cast<int>(columns.size()); }
    int num_rows() const { return static_cast<int>(rows.size()); }
    Eigen::VectorXd costs() const;
    /// Row activities a_i'x.
    Eigen::VectorXd activities(const Eigen::VectorXd& x) const;
    double objective(const Eigen::VectorXd& x) const;
};

/// Single-owner builder; validates column references as rows are added.
class Builder {
public:
    int add_column(std::string name, double lower, double upper, double cost = 0.0);
    /// Adds `count` consecutive columns sharing bounds and cost; returns the first index.
    int add_columns(const std::string& prefix, int count, double lower, double upper, double cost = 0.0);
    int add_row(std::string name, std::vector<Term> terms, Sense sense, double rhs);

    void set_bounds(int col, double lower, double upper);
    void set_cost(int col, double cost);
    void add_objective_offset(double v) { problem_.objective_offset += v; }

    int num_cols() const { return problem_.num_cols(); }
    int num_rows() const { return problem_.num_rows(); }
    const Problem& peek() const { return problem_; }
    Problem build() &&;

private:
    Problem problem_;
};

/// Dual convention (minimisation): every stored dual is the decrease of the optimal
/// objective per unit relaxation of the constraint.
///  - "<=" row: -d obj / d rhs  (>= 0)
///  - ">=" row: +d obj / d rhs  (>= 0)
///  - "="  row: -d obj / d rhs  (free sign)
/// Column duals follow the same rule for the active bound: positive at an active
/// upper bound means raising it lowers the objective; positive at an active lower
/// bound means lowering it lowers the objective. Reduced costs are c - A'y.
struct Solution {
    Status status = Status::Error;
    std::string message;
    double objective = 0.0;
    Eigen::VectorXd primal;       ///< per column
    Eigen::VectorXd row_dual;     ///< per row, normalised as above
    Eigen::VectorXd reduced_cost; ///< per column, c - A'y in the solver's native signs

    bool optimal() const { return status == Status::Optimal; }
};

struct SolveOptions {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    bool presolve = true;
};

Solution solve(const Problem& problem, const SolveOptions& options = {});

/// Max violation of rows and bounds at x.
double primal_residual(const Problem& problem, const Eigen::VectorXd& x);
/// Max |dual * slack| over rows and |reduced cost * bound slack| over columns.
double complementary_slackness_residual(const Problem& problem, const Solution& sol);
/// Dual objective reconstructed from row duals and reduced costs.
double dual_objective(const Problem& problem, const Solution& sol);

struct VertexResult {
    Status status = Status::Error;
    double objective = 0.0;
    Eigen::VectorXd argmin;
    long long bases_tried = 0;
};

/// Exhaustive basis enumeration for tiny LPs (at most 12 columns).
/// Unboundedness is detected by comparing optima under two artificial boxes.
VertexResult brute_force_vertices(const Problem& problem, long long max_bases = 20'000'000);

/// CPLEX-LP text export.
void write_lp(const Problem& problem, std::ostream& os);

}  // namespace dsoflex::lp

#endif  // DSOFLEX_LP_HPP
