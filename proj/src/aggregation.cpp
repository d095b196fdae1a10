#include "dsoflex/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

namespace dsoflex {

void FlexRegion::validate() const {
    const int M = rows(), T = slots();
    if (M == 0 || T == 0) throw Error("FlexRegion: empty");
    for (const Profile* v : {&scale, &phi_lo, &phi_hi, &traj_base})
        if (v->size() != M) throw Error("FlexRegion: row vector length differs from U");
    if (p_base.size() != T) throw Error("FlexRegion: p_base length differs from U");
    if (static_cast<int>(row_kind.size()) != M) throw Error("FlexRegion: row_kind length");
    for (int m = 0; m < M; ++m) {
        bool nonzero = false;
        for (int t = 0; t < T; ++t) {
            const double u = U(m, t);
            if (u != 0.0 && u != 1.0) throw Error("FlexRegion: U entries must be 0 or 1");
            nonzero |= u == 1.0;
        }
        if (!nonzero) throw Error("FlexRegion: all-zero row in U");
        if (!(scale(m) > 0)) throw Error("FlexRegion: row scale must be > 0");
        const double tol = 1e-7 * (1.0 + std::abs(traj_base(m)));
        if (phi_lo(m) > traj_base(m) + tol || traj_base(m) > phi_hi(m) + tol)
            throw Error("FlexRegion: baseline trajectory outside bounds at row " + std::to_string(m));
    }
    if ((trajectory(p_base) - traj_base).cwiseAbs().maxCoeff() >
        1e-9 * (1.0 + traj_base.cwiseAbs().maxCoeff()))
        throw Error("FlexRegion: traj_base inconsistent with p_base");
}

bool FlexRegion::contains(const Profile& p, double tol) const {
    if (p.size() != slots()) return false;
    const Profile phi = trajectory(p);
    return ((phi - phi_lo).array() >= -tol).all() && ((phi_hi - phi).array() >= -tol).all();
}

void AggregatorBid::validate() const {
    region.validate();
    const int M = region.rows();
    if (c_up.size() != M || c_dn.size() != M) throw Error("AggregatorBid " + id + ": coefficient length");
    if ((c_up.array() < 0).any() || (c_dn.array() < 0).any())
        throw Error("AggregatorBid " + id + ": negative cost coefficient");
    for (int m = 0; m < M; ++m)
        if (region.row_kind[m].kind == RowKind::Other && (c_up(m) != 0 || c_dn(m) != 0))
            throw Error("AggregatorBid " + id + ": nonzero coefficient on an OTHER row");
    if (!std::isfinite(power_factor_angle_rad) || std::abs(power_factor_angle_rad) >= M_PI / 2)
        throw Error("AggregatorBid " + id + ": power factor angle outside (-pi/2, pi/2)");
}

FlexRegion aggregate_outer(const std::vector<DerSpec>& ders, const TimeGrid& grid) {
    grid.validate();
    if (ders.empty()) throw Error("aggregate_outer: empty fleet");
    const int T = grid.T;
    FlexRegion r;
    r.U = Eigen::MatrixXd::Zero(2 * T, T);
    r.scale.resize(2 * T);
    r.row_kind.resize(2 * T);
    for (int t = 0; t < T; ++t) {
        r.U(t, t) = 1.0;
        r.scale(t) = 1.0;
        r.row_kind[t] = {RowKind::Power, t};
        r.U.row(T + t).head(t + 1).setOnes();
        r.scale(T + t) = grid.dt;
        r.row_kind[T + t] = {RowKind::Energy, t};
    }
    r.phi_lo = r.phi_hi = Profile::Zero(2 * T);
    r.p_base = Profile::Zero(T);
    for (const DerSpec& d : ders) {
        validate(d, grid);
        r.phi_lo.head(T) += d.p_lo;
        r.phi_hi.head(T) += d.p_hi;
        r.phi_lo.tail(T).array() += d.e_lo.array() - d.e_offset;
        r.phi_hi.tail(T).array() += d.e_hi.array() - d.e_offset;
        r.p_base += d.p_base;
    }
    r.traj_base = r.trajectory(r.p_base);
    r.validate();
    return r;
}

FlexRegion shrink_region(const FlexRegion& outer, double shrink) {
    if (!(shrink >= 0.0 && shrink <= 1.0)) throw Error("shrink factor outside [0, 1]");
    FlexRegion r = outer;
    for (int m = 0; m < r.rows(); ++m) {
        if (r.row_kind[m].kind != RowKind::Energy) continue;
        const double b = r.traj_base(m);
        r.phi_lo(m) = b - (1.0 - shrink) * (b - outer.phi_lo(m));
        r.phi_hi(m) = b + (1.0 - shrink) * (outer.phi_hi(m) - b);
    }
    return r;
}

namespace {

/// Optimises a linear objective over the region; returns an empty profile on failure.
Profile region_vertex(const FlexRegion& r, const Profile& cost) {
    lp::Builder b;
    for (int t = 0; t < r.slots(); ++t) b.add_column("p" + std::to_string(t), -lp::kInf, lp::kInf, cost(t));
    for (int m = 0; m < r.rows(); ++m) {
        std::vector<lp::Term> terms;
        for (int t = 0; t < r.slots(); ++t)
            if (r.U(m, t) != 0.0) terms.push_back({t, r.scale(m)});
        b.add_row("lo" + std::to_string(m), terms, lp::Sense::GreaterEqual, r.phi_lo(m));
        b.add_row("hi" + std::to_string(m), std::move(terms), lp::Sense::LessEqual, r.phi_hi(m));
    }
    const lp::Solution s = lp::solve(std::move(b).build());
    return s.optimal() ? s.primal : Profile();
}

bool certify(const std::vector<DerSpec>& ders, const FlexRegion& r, const TimeGrid& grid,
             const InnerOptions& opt, int* probes) {
    const int T = grid.T;
    std::vector<Profile> directions;
    for (int m = 0; m < r.rows(); ++m) {
        if (r.row_kind[m].kind != RowKind::Energy) continue;
        const Profile row = r.U.row(m).transpose();
        directions.push_back(row);
        directions.push_back(-row);
    }
    const Profile total = r.U.bottomRows(T).colwise().sum().transpose();
    directions.push_back(total);
    directions.push_back(-total);
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int k = 0; k < opt.random_probes; ++k) {
        Profile d(T);
        for (int t = 0; t < T; ++t) d(t) = unif(rng);
        directions.push_back(d);
    }

    std::vector<Profile> seen;
    for (const Profile& d : directions) {
        const Profile p = region_vertex(r, d);
        if (p.size() == 0) return false;
        const bool dup = std::any_of(seen.begin(), seen.end(), [&](const Profile& q) {
            return (q - p).cwiseAbs().maxCoeff() <= 1e-9;
        });
        if (dup) continue;
        seen.push_back(p);
        if (probes) ++*probes;
        if (!disaggregate(ders, p, grid, DisaggObjective::Feasibility).feasible) return false;
    }
    return true;
}

}  // namespace

FlexRegion aggregate_inner(const std::vector<DerSpec>& ders, const TimeGrid& grid, double shrink,
                           InnerReport* report, const InnerOptions& opt) {
    const FlexRegion outer = aggregate_outer(ders, grid);
    InnerReport rep;
    const auto attempt = [&](double s) {
        ++rep.iterations;
        return certify(ders, shrink_region(outer, s), grid, opt, &rep.probes_checked);
    };
    double hi = shrink;
    if (!attempt(shrink)) {
        double lo = shrink;
        hi = 1.0;
        if (!attempt(1.0)) throw Error("aggregate_inner: cannot certify even the baseline trajectory");
        while (hi - lo > opt.tolerance && rep.iterations < opt.max_iterations) {
            const double mid = 0.5 * (lo + hi);
            (attempt(mid) ? hi : lo) = mid;
        }
    }
    rep.shrink = hi;
    if (report) *report = rep;
    return shrink_region(outer, hi);
}

std::pair<Profile, Profile> estimate_cost_coeffs(const std::vector<DerSpec>& ders,
                                                 const FlexRegion& region, const TimeGrid& grid) {
    const int M = region.rows();
    Profile num_up = Profile::Zero(M), den_up = Profile::Zero(M);
    Profile num_dn = Profile::Zero(M), den_dn = Profile::Zero(M);
    for (const DerSpec& d : ders) {
        const Profile eb = d.e_base(grid);
        for (int m = 0; m < M; ++m) {
            const RowTag tag = region.row_kind[m];
            double gap_up = 0, gap_dn = 0, cu = 0, cd = 0;
            if (tag.kind == RowKind::Power) {
                gap_up = d.p_hi(tag.t) - d.p_base(tag.t);
                gap_dn = d.p_base(tag.t) - d.p_lo(tag.t);
                cu = d.c_p_up(tag.t);
                cd = d.c_p_dn(tag.t);
            } else if (tag.kind == RowKind::Energy) {
                gap_up = d.e_hi(tag.t) - eb(tag.t);
                gap_dn = eb(tag.t) - d.e_lo(tag.t);
                cu = d.c_e_up(tag.t);
                cd = d.c_e_dn(tag.t);
            } else {
                continue;
            }
            gap_up = std::max(0.0, gap_up);
            gap_dn = std::max(0.0, gap_dn);
            num_up(m) += cu * gap_up;
            den_up(m) += gap_up;
            num_dn(m) += cd * gap_dn;
            den_dn(m) += gap_dn;
        }
    }
    Profile c_up = Profile::Zero(M), c_dn = Profile::Zero(M);
    for (int m = 0; m < M; ++m) {
        if (den_up(m) > 1e-12) c_up(m) = num_up(m) / den_up(m);
        if (den_dn(m) > 1e-12) c_dn(m) = num_dn(m) / den_dn(m);
    }
    return {c_up, c_dn};
}

Disaggregation disaggregate(const std::vector<DerSpec>& ders, const Profile& target,
                            const TimeGrid& grid, DisaggObjective objective) {
    grid.check_length(target, "disaggregate target");
    const int T = grid.T;
    const double w = objective == DisaggObjective::L1FromBaseline ? 1.0 : 0.0;
    lp::Builder b;
    // Per DER and slot: p = p_base + up - dn; d = e - e_base carried by a state column.
    struct Cols { std::vector<int> up, dn, dev; };
    std::vector<Cols> cols(ders.size());
    std::vector<std::vector<lp::Term>> balance(T);
    Profile rhs = target;
    for (std::size_t k = 0; k < ders.size(); ++k) {
        const DerSpec& d = ders[k];
        grid.check_length(d.p_base, "disaggregate DER");
        const Profile eb = d.e_base(grid);
        rhs -= d.p_base;
        Cols& c = cols[k];
        c.up.assign(T, -1);
        c.dn.assign(T, -1);
        c.dev.assign(T, -1);
        const std::string tag = "k" + std::to_string(k) + "_";
        for (int t = 0; t < T; ++t) {
            const double gu = std::max(0.0, d.p_hi(t) - d.p_base(t));
            const double gd = std::max(0.0, d.p_base(t) - d.p_lo(t));
            if (gu > 0) c.up[t] = b.add_column(tag + "up" + std::to_string(t), 0, gu, w);
            if (gd > 0) c.dn[t] = b.add_column(tag + "dn" + std::to_string(t), 0, gd, w);
            c.dev[t] = b.add_column(tag + "de" + std::to_string(t), std::min(0.0, d.e_lo(t) - eb(t)),
                                    std::max(0.0, d.e_hi(t) - eb(t)));
            std::vector<lp::Term> row{{c.dev[t], 1.0}};
            if (t > 0) row.push_back({c.dev[t - 1], -1.0});
            if (c.up[t] >= 0) {
                row.push_back({c.up[t], -grid.dt});
                balance[t].push_back({c.up[t], 1.0});
            }
            if (c.dn[t] >= 0) {
                row.push_back({c.dn[t], grid.dt});
                balance[t].push_back({c.dn[t], -1.0});
            }
            b.add_row(tag + "state" + std::to_string(t), std::move(row), lp::Sense::Equal, 0.0);
        }
    }
    for (int t = 0; t < T; ++t)
        b.add_row("sum" + std::to_string(t), std::move(balance[t]), lp::Sense::Equal, rhs(t));

    Disaggregation out;
    const lp::Solution s = lp::solve(std::move(b).build());
    out.status = s.status;
    if (!s.optimal()) return out;
    Profile sum = Profile::Zero(T);
    for (std::size_t k = 0; k < ders.size(); ++k) {
        Profile p = ders[k].p_base;
        for (int t = 0; t < T; ++t) {
            if (cols[k].up[t] >= 0) p(t) += s.primal(cols[k].up[t]);
            if (cols[k].dn[t] >= 0) p(t) -= s.primal(cols[k].dn[t]);
        }
        if (!is_feasible(ders[k], p, grid, 1e-6)) {
            out.status = lp::Status::Infeasible;
            out.profiles.clear();
            return out;
        }
        sum += p;
        out.profiles.push_back(std::move(p));
    }
    if ((sum - target).cwiseAbs().maxCoeff() > 1e-6) {
        out.status = lp::Status::Infeasible;
        out.profiles.clear();
        return out;
    }
    out.feasible = true;
    return out;
}

double aggregator_cost(const AggregatorBid& bid, const TrajectoryRanges& r) {
    const int M = bid.region.rows();
    if (r.dphi_up.size() != M || r.dphi_dn.size() != M)
        throw Error("aggregator_cost: range length differs from the bid's region");
    if ((r.dphi_up.array() < 0).any() || (r.dphi_dn.array() < 0).any())
        throw Error("aggregator_cost: negative range component");
    return bid.c_up.dot(r.dphi_up) + bid.c_dn.dot(r.dphi_dn);
}

AggregatorBid make_bid(std::string id, int node, double power_factor, FlexRegion region,
                       Profile c_up, Profile c_dn) {
    if (!(power_factor > 0.0 && power_factor <= 1.0)) throw Error("power factor outside (0, 1]");
    AggregatorBid bid;
    bid.id = std::move(id);
    bid.node = node;
    bid.power_factor_angle_rad = std::acos(power_factor);
    bid.region = std::move(region);
    bid.c_up = std::move(c_up);
    bid.c_dn = std::move(c_dn);
    bid.validate();
    return bid;
}

void write_region(const FlexRegion& r, std::ostream& os) {
    char buf[160];
    int nnz = 0;
    for (int m = 0; m < r.rows(); ++m)
        for (int t = 0; t < r.slots(); ++t) nnz += r.U(m, t) != 0.0;
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << r.rows() << ' ' << r.slots() << ' ' << nnz << '\n';
    for (int t = 0; t < r.slots(); ++t)
        for (int m = 0; m < r.rows(); ++m)
            if (r.U(m, t) != 0.0) os << m + 1 << ' ' << t + 1 << " 1\n";
    os << "% row kind slot scale phi_lo phi_hi traj_base\n";
    for (int m = 0; m < r.rows(); ++m) {
        const char* kind = r.row_kind[m].kind == RowKind::Power    ? "POWER"
                           : r.row_kind[m].kind == RowKind::Energy ? "ENERGY"
                                                                   : "OTHER";
        std::snprintf(buf, sizeof buf, "%% %d %s %d %.12g %.12g %.12g %.12g\n", m + 1, kind,
                      r.row_kind[m].t + 1, r.scale(m), r.phi_lo(m), r.phi_hi(m), r.traj_base(m));
        os << buf;
    }
}

}  // namespace dsoflex
