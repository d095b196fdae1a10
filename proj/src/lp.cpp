#include "dsoflex/lp.hpp"

#include "Highs.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace dsoflex::lp {

const char* to_string(Status s) {
    switch (s) {
        case Status::Optimal: return "OPTIMAL";
        case Status::Infeasible: return "INFEASIBLE";
        case Status::Unbounded: return "UNBOUNDED";
        case Status::Error: return "ERROR";
    }
    return "?";
}

Eigen::VectorXd Problem::costs() const {
    Eigen::VectorXd c(num_cols());
    for (int j = 0; j < num_cols(); ++j) c(j) = columns[j].cost;
    return c;
}

Eigen::VectorXd Problem::activities(const Eigen::VectorXd& x) const {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(num_rows());
    for (int i = 0; i < num_rows(); ++i)
        for (const Term& t : rows[i].terms) a(i) += t.coef * x(t.col);
    return a;
}

double Problem::objective(const Eigen::VectorXd& x) const { return costs().dot(x) + objective_offset; }

int Builder::add_column(std::string name, double lower, double upper, double cost) {
    if (!std::isfinite(cost)) throw Error("lp: non-finite objective coefficient for " + name);
    if (lower > upper) throw Error("lp: empty bounds for column " + name);
    problem_.columns.push_back({std::move(name), lower, upper, cost});
    return problem_.num_cols() - 1;
}

int Builder::add_columns(const std::string& prefix, int count, double lower, double upper,
                         double cost) {
    const int first = num_cols();
    for (int k = 0; k < count; ++k) add_column(prefix + "_" + std::to_string(k), lower, upper, cost);
    return first;
}

int Builder::add_row(std::string name, std::vector<Term> terms, Sense sense, double rhs) {
    for (const Term& t : terms) {
        if (t.col < 0 || t.col >= num_cols())
            throw Error("lp: row " + name + " references unknown column");
        if (!std::isfinite(t.coef)) throw Error("lp: non-finite coefficient in row " + name);
    }
    if (!std::isfinite(rhs)) throw Error("lp: non-finite rhs in row " + name);
    problem_.rows.push_back({std::move(name), std::move(terms), sense, rhs});
    return problem_.num_rows() - 1;
}

void Builder::set_bounds(int col, double lower, double upper) {
    if (lower > upper) throw Error("lp: empty bounds for column " + problem_.columns.at(col).name);
    problem_.columns.at(col).lower = lower;
    problem_.columns.at(col).upper = upper;
}

void Builder::set_cost(int col, double cost) {
    if (!std::isfinite(cost)) throw Error("lp: non-finite objective coefficient");
    problem_.columns.at(col).cost = cost;
}

Problem Builder::build() && { return std::move(problem_); }

namespace {

HighsLp to_highs(const Problem& p) {
    HighsLp lp;
    const int n = p.num_cols(), m = p.num_rows();
    lp.num_col_ = n;
    lp.num_row_ = m;
    lp.sense_ = ObjSense::kMinimize;
    lp.offset_ = p.objective_offset;
    lp.col_cost_.resize(n);
    lp.col_lower_.resize(n);
    lp.col_upper_.resize(n);
    for (int j = 0; j < n; ++j) {
        lp.col_cost_[j] = p.columns[j].cost;
        lp.col_lower_[j] = p.columns[j].lower;
        lp.col_upper_[j] = p.columns[j].upper;
    }
    lp.row_lower_.resize(m);
    lp.row_upper_.resize(m);
    std::vector<int> count(n + 1, 0);
    for (int i = 0; i < m; ++i) {
        const Row& r = p.rows[i];
        lp.row_lower_[i] = r.sense == Sense::LessEqual ? -kHighsInf : r.rhs;
        lp.row_upper_[i] = r.sense == Sense::GreaterEqual ? kHighsInf : r.rhs;
        for (const Term& t : r.terms) ++count[t.col + 1];
    }
    for (int j = 0; j < n; ++j) count[j + 1] += count[j];
    auto& a = lp.a_matrix_;
    a.format_ = MatrixFormat::kColwise;
    a.num_col_ = n;
    a.num_row_ = m;
    a.start_.assign(count.begin(), count.end());
    a.index_.resize(count[n]);
    a.value_.resize(count[n]);
    std::vector<int> next(count.begin(), count.end() - 1);
    for (int i = 0; i < m; ++i)
        for (const Term& t : p.rows[i].terms) {
            a.index_[next[t.col]] = i;
            a.value_[next[t.col]] = t.coef;
            ++next[t.col];
        }
    return lp;
}

Status run_highs(Highs& h, const SolveOptions& o, bool presolve) {
    h.setOptionValue("output_flag", false);
    h.setOptionValue("threads", 1);
    h.setOptionValue("solver", "simplex");
    h.setOptionValue("presolve", presolve ? "on" : "off");
    h.setOptionValue("primal_feasibility_tolerance", o.feasibility_tol);
    h.setOptionValue("dual_feasibility_tolerance", o.optimality_tol);
    if (h.run() != HighsStatus::kOk) return Status::Error;
    switch (h.getModelStatus()) {
        case HighsModelStatus::kOptimal: return Status::Optimal;
        case HighsModelStatus::kInfeasible: return Status::Infeasible;
        case HighsModelStatus::kUnbounded: return Status::Unbounded;
        default: return Status::Error;
    }
}

}  // namespace

Solution solve(const Problem& problem, const SolveOptions& options) {
    Solution sol;
    const int n = problem.num_cols(), m = problem.num_rows();
    if (n == 0) {
        // Row-only problems: feasible iff every rhs is satisfied at zero.
        const bool ok = std::all_of(problem.rows.begin(), problem.rows.end(), [](const Row& r) {
            return r.sense == Sense::LessEqual ? r.rhs >= 0
                   : r.sense == Sense::GreaterEqual ? r.rhs <= 0
                                                    : r.rhs == 0;
        });
        sol.status = ok ? Status::Optimal : Status::Infeasible;
        sol.objective = problem.objective_offset;
        sol.primal.resize(0);
        sol.row_dual = Eigen::VectorXd::Zero(m);
        sol.reduced_cost.resize(0);
        return sol;
    }

    Highs h;
    h.setOptionValue("output_flag", false);
    if (h.passModel(to_highs(problem)) == HighsStatus::kError) {
        sol.message = "model rejected by the LP engine";
        return sol;
    }
    Status st = run_highs(h, options, options.presolve);
    if (h.getModelStatus() == HighsModelStatus::kUnboundedOrInfeasible ||
        (st == Status::Error && options.presolve)) {
        h.clearSolver();
        st = run_highs(h, options, false);
    }
    sol.status = st;
    sol.message = h.modelStatusToString(h.getModelStatus());
    if (st != Status::Optimal) return sol;

    const HighsSolution& hs = h.getSolution();
    if (!hs.value_valid || !hs.dual_valid) {
        sol.status = Status::Error;
        sol.message = "solver returned no primal/dual pair";
        return sol;
    }
    sol.objective = h.getInfo().objective_function_value;
    sol.primal = Eigen::Map<const Eigen::VectorXd>(hs.col_value.data(), n);
    sol.reduced_cost = Eigen::Map<const Eigen::VectorXd>(hs.col_dual.data(), n);
    sol.row_dual.resize(m);
    for (int i = 0; i < m; ++i) {
        const double y = hs.row_dual[i];  // d obj / d (active row bound)
        sol.row_dual(i) = problem.rows[i].sense == Sense::GreaterEqual ? y : -y;
    }
    return sol;
}

double primal_residual(const Problem& p, const Eigen::VectorXd& x) {
    double worst = 0.0;
    const Eigen::VectorXd a = p.activities(x);
    for (int i = 0; i < p.num_rows(); ++i) {
        const double d = a(i) - p.rows[i].rhs;
        switch (p.rows[i].sense) {
            case Sense::LessEqual: worst = std::max(worst, d); break;
            case Sense::GreaterEqual: worst = std::max(worst, -d); break;
            case Sense::Equal: worst = std::max(worst, std::abs(d)); break;
        }
    }
    for (int j = 0; j < p.num_cols(); ++j) {
        worst = std::max(worst, p.columns[j].lower - x(j));
        worst = std::max(worst, x(j) - p.columns[j].upper);
    }
    return worst;
}

double complementary_slackness_residual(const Problem& p, const Solution& s) {
    double worst = 0.0;
    const Eigen::VectorXd a = p.activities(s.primal);
    for (int i = 0; i < p.num_rows(); ++i) {
        if (p.rows[i].sense == Sense::Equal) continue;
        worst = std::max(worst, std::abs(s.row_dual(i) * (a(i) - p.rows[i].rhs)));
    }
    for (int j = 0; j < p.num_cols(); ++j) {
        const double d = s.reduced_cost(j);
        const Column& c = p.columns[j];
        // A positive reduced cost must sit at the lower bound, a negative one at the upper.
        const double slack = d > 0 ? s.primal(j) - c.lower : c.upper - s.primal(j);
        if (d != 0.0) worst = std::max(worst, std::abs(d) * (std::isfinite(slack) ? slack : 1e300));
    }
    return worst;
}

double dual_objective(const Problem& p, const Solution& s) {
    double v = p.objective_offset;
    for (int i = 0; i < p.num_rows(); ++i) {
        // Convert back to the native multiplier y_i = d obj / d rhs_i.
        const double y = p.rows[i].sense == Sense::GreaterEqual ? s.row_dual(i) : -s.row_dual(i);
        v += y * p.rows[i].rhs;
    }
    for (int j = 0; j < p.num_cols(); ++j) {
        const double d = s.reduced_cost(j);
        if (d > 0) v += d * p.columns[j].lower;
        else if (d < 0) v += d * p.columns[j].upper;
    }
    return v;
}

namespace {

struct Hyperplane {
    Eigen::VectorXd a;
    double b;
    Sense sense;  // a'x (sense) b
};

VertexResult enumerate(const Problem& p, double box, long long max_bases) {
    const int n = p.num_cols();
    std::vector<Hyperplane> equalities, inequalities;
    for (const Row& r : p.rows) {
        Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
        for (const Term& t : r.terms) a(t.col) += t.coef;
        (r.sense == Sense::Equal ? equalities : inequalities).push_back({a, r.rhs, r.sense});
    }
    for (int j = 0; j < n; ++j) {
        const Eigen::VectorXd e = Eigen::VectorXd::Unit(n, j);
        const double lo = std::isfinite(p.columns[j].lower) ? p.columns[j].lower : -box;
        const double hi = std::isfinite(p.columns[j].upper) ? p.columns[j].upper : box;
        if (lo == hi) {
            equalities.push_back({e, lo, Sense::Equal});
        } else {
            inequalities.push_back({e, lo, Sense::GreaterEqual});
            inequalities.push_back({e, hi, Sense::LessEqual});
        }
    }

    VertexResult res;
    res.status = Status::Infeasible;
    const int need = n - static_cast<int>(equalities.size());
    const int k = static_cast<int>(inequalities.size());
    if (need < 0 || need > k) {
        // Over-determined equality system: fall back to least-squares check of a unique point.
        if (need < 0) {
            Eigen::MatrixXd A(equalities.size(), n);
            Eigen::VectorXd b(equalities.size());
            for (std::size_t i = 0; i < equalities.size(); ++i) {
                A.row(i) = equalities[i].a.transpose();
                b(i) = equalities[i].b;
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
            if (lu.rank() == n) {
                Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
                if (primal_residual(p, x) <= 1e-9) {
                    res.status = Status::Optimal;
                    res.argmin = x;
                    res.objective = p.objective(x);
                }
            }
        }
        return res;
    }

    const Eigen::VectorXd c = p.costs();
    std::vector<int> idx(need);
    for (int i = 0; i < need; ++i) idx[i] = i;
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd b(n);
    for (std::size_t i = 0; i < equalities.size(); ++i) {
        A.row(i) = equalities[i].a.transpose();
        b(i) = equalities[i].b;
    }
    const int base = static_cast<int>(equalities.size());
    bool first = true;
    while (true) {
        if (++res.bases_tried > max_bases) throw Error("brute_force_vertices: basis budget exceeded");
        for (int i = 0; i < need; ++i) {
            A.row(base + i) = inequalities[idx[i]].a.transpose();
            b(base + i) = inequalities[idx[i]].b;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (lu.rank() == n) {
            const Eigen::VectorXd x = lu.solve(b);
            bool feasible = true;
            for (const Hyperplane& h : equalities)
                if (std::abs(h.a.dot(x) - h.b) > 1e-9 * (1 + std::abs(h.b))) feasible = false;
            for (const Hyperplane& h : inequalities) {
                const double d = h.a.dot(x) - h.b;
                const double tol = 1e-9 * (1 + std::abs(h.b));
                if ((h.sense == Sense::LessEqual && d > tol) ||
                    (h.sense == Sense::GreaterEqual && d < -tol))
                    feasible = false;
            }
            if (feasible) {
                const double v = c.dot(x) + p.objective_offset;
                if (first || v < res.objective) {
                    res.objective = v;
                    res.argmin = x;
                    first = false;
                }
                res.status = Status::Optimal;
            }
        }
        // next combination
        int i = need - 1;
        while (i >= 0 && idx[i] == k - need + i) --i;
        if (i < 0) break;
        ++idx[i];
        for (int j = i + 1; j < need; ++j) idx[j] = idx[j - 1] + 1;
        if (need == 0) break;
    }
    return res;
}

}  // namespace

VertexResult brute_force_vertices(const Problem& problem, long long max_bases) {
    if (problem.num_cols() > 12) throw Error("brute_force_vertices: more than 12 columns");
    if (problem.num_cols() == 0) throw Error("brute_force_vertices: empty problem");
    const double box = 1e6;
    VertexResult small = enumerate(problem, box, max_bases);
    if (small.status != Status::Optimal) return small;
    VertexResult large = enumerate(problem, 10 * box, max_bases);
    large.bases_tried += small.bases_tried;
    if (large.status == Status::Optimal &&
        large.objective < small.objective - 1e-6 * (1 + std::abs(small.objective))) {
        large.status = Status::Unbounded;
        return large;
    }
    small.bases_tried = large.bases_tried;
    return small;
}

namespace {

std::string lp_name(const std::string& s, const char* fallback, int idx) {
    std::string out;
    for (char ch : s) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.') ? ch : '_';
    if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0])) || out[0] == '.')
        out = std::string(fallback) + std::to_string(idx) + "_" + out;
    return out;
}

void write_terms(std::ostream& os, const std::vector<std::pair<int, double>>& terms,
                 const std::vector<std::string>& names) {
    int on_line = 0;
    for (const auto& [j, v] : terms) {
        os << (v < 0 ? " - " : " + ") << std::abs(v) << ' ' << names[j];
        if (++on_line % 8 == 0) os << "\n   ";
    }
    if (terms.empty()) os << " 0 " << (names.empty() ? "x" : names[0]);
}

}  // namespace

void write_lp(const Problem& p, std::ostream& os) {
    std::vector<std::string> names(p.num_cols());
    for (int j = 0; j < p.num_cols(); ++j) names[j] = lp_name(p.columns[j].name, "c", j);
    const auto old_precision = os.precision(17);
    os << "\\ objective offset " << p.objective_offset << "\nMinimize\n obj:";
    std::vector<std::pair<int, double>> obj;
    for (int j = 0; j < p.num_cols(); ++j)
        if (p.columns[j].cost != 0.0) obj.emplace_back(j, p.columns[j].cost);
    write_terms(os, obj, names);
    os << "\nSubject To\n";
    for (int i = 0; i < p.num_rows(); ++i) {
        const Row& r = p.rows[i];
        os << ' ' << lp_name(r.name, "r", i) << ':';
        std::vector<std::pair<int, double>> terms;
        for (const Term& t : r.terms) terms.emplace_back(t.col, t.coef);
        write_terms(os, terms, names);
        os << (r.sense == Sense::LessEqual ? " <= " : r.sense == Sense::GreaterEqual ? " >= " : " = ")
           << r.rhs << '\n';
    }
    os << "Bounds\n";
    for (int j = 0; j < p.num_cols(); ++j) {
        const Column& c = p.columns[j];
        if (!std::isfinite(c.lower) && !std::isfinite(c.upper)) {
            os << ' ' << names[j] << " free\n";
        } else if (c.lower == c.upper) {
            os << ' ' << names[j] << " = " << c.lower << '\n';
        } else {
            os << ' ';
            if (std::isfinite(c.lower)) os << c.lower; else os << "-inf";
            os << " <= " << names[j] << " <= ";
            if (std::isfinite(c.upper)) os << c.upper; else os << "+inf";
            os << '\n';
        }
    }
    os << "End\n";
    os.precision(old_precision);
}

}  // namespace dsoflex::lp
