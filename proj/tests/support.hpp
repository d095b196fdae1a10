#ifndef DSOFLEX_TESTS_SUPPORT_HPP
#define DSOFLEX_TESTS_SUPPORT_HPP

#include "dsoflex/aggregation.hpp"
#include "dsoflex/der_flex.hpp"
#include "dsoflex/lp.hpp"

#include <random>
#include <string>

namespace testing {

using dsoflex::Profile;

inline std::string data_path(const std::string& rel) { return std::string(DSOFLEX_DATA_DIR) + "/" + rel; }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Profile random_profile(std::mt19937_64& rng, int n, double lo, double hi) {
    Profile v(n);
    for (int i = 0; i < n; ++i) v(i) = uniform(rng, lo, hi);
    return v;
}

/// Vertex of { x : lo <= x <= hi, row_lo <= R x <= row_hi } maximising a random direction.
inline Profile random_vertex(std::mt19937_64& rng, const Profile& lo, const Profile& hi,
                             const Eigen::MatrixXd& R, const Profile& row_lo, const Profile& row_hi) {
    namespace lp = dsoflex::lp;
    lp::Builder b;
    const int n = static_cast<int>(lo.size());
    for (int j = 0; j < n; ++j) b.add_column("x" + std::to_string(j), lo(j), hi(j), uniform(rng, -1, 1));
    for (int i = 0; i < R.rows(); ++i) {
        std::vector<lp::Term> terms;
        for (int j = 0; j < n; ++j)
            if (R(i, j) != 0.0) terms.push_back({j, R(i, j)});
        b.add_row("lo" + std::to_string(i), terms, lp::Sense::GreaterEqual, row_lo(i));
        b.add_row("hi" + std::to_string(i), terms, lp::Sense::LessEqual, row_hi(i));
    }
    const lp::Solution s = lp::solve(std::move(b).build());
    if (!s.optimal()) throw dsoflex::Error("random_vertex: sampling LP not optimal");
    return s.primal;
}

/// Random point of one DER's region: a convex mix of a random vertex and the baseline.
inline Profile random_der_point(std::mt19937_64& rng, const dsoflex::DerSpec& d, const dsoflex::TimeGrid& g) {
    const int T = g.T;
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(T, T);
    R.triangularView<Eigen::Lower>().setConstant(g.dt);
    const Profile off = Profile::Constant(T, d.e_offset);
    const Profile v = random_vertex(rng, d.p_lo, d.p_hi, R, d.e_lo - off, d.e_hi - off);
    const double w = uniform(rng, 0.0, 1.0);
    return w * v + (1.0 - w) * d.p_base;
}

/// Random point strictly inside a region that contains its baseline.
inline Profile random_region_point(std::mt19937_64& rng, const dsoflex::FlexRegion& r) {
    const int T = r.slots();
    const Eigen::MatrixXd R = r.scale.asDiagonal() * r.U;
    const Profile inf = Profile::Constant(T, dsoflex::lp::kInf);
    const Profile v = random_vertex(rng, -inf, inf, R, r.phi_lo, r.phi_hi);
    const double w = uniform(rng, 0.05, 0.95);
    return w * v + (1.0 - w) * r.p_base;
}

}  // namespace testing

#endif  // DSOFLEX_TESTS_SUPPORT_HPP
