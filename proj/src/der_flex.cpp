#include "dsoflex/der_flex.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dsoflex {

std::string_view to_string(DerKind kind) {
    switch (kind) {
        case DerKind::EV: return "EV";
        case DerKind::BESS: return "BESS";
        case DerKind::HP: return "HP";
        case DerKind::PV_CURTAILABLE: return "PV_CURTAILABLE";
    }
    return "?";
}

DerKind der_kind_from_string(std::string_view name) {
    if (name == "EV") return DerKind::EV;
    if (name == "BESS") return DerKind::BESS;
    if (name == "HP") return DerKind::HP;
    if (name == "PV_CURTAILABLE" || name == "PV") return DerKind::PV_CURTAILABLE;
    throw Error("unknown DER kind '" + std::string(name) + "'");
}

Profile DerSpec::energy(const Profile& p, const TimeGrid& grid) const {
    grid.check_length(p, "DerSpec::energy");
    Profile e(grid.T);
    double acc = e_offset;
    for (int t = 0; t < grid.T; ++t) {
        acc += p(t) * grid.dt;
        e(t) = acc;
    }
    return e;
}

Profile DerSpec::e_base(const TimeGrid& grid) const { return energy(p_base, grid); }

void validate(const DerSpec& s, const TimeGrid& grid) {
    grid.validate();
    const std::pair<const Profile*, const char*> fields[] = {
        {&s.p_base, "p_base"}, {&s.p_lo, "p_lo"},     {&s.p_hi, "p_hi"},
        {&s.e_lo, "e_lo"},     {&s.e_hi, "e_hi"},     {&s.c_p_up, "c_p_up"},
        {&s.c_p_dn, "c_p_dn"}, {&s.c_e_up, "c_e_up"}, {&s.c_e_dn, "c_e_dn"},
    };
    for (const auto& [v, name] : fields) {
        grid.check_length(*v, std::string("DerSpec.") + name);
        if (!v->allFinite()) throw Error(std::string("DerSpec.") + name + " is not finite");
    }
    if (((s.p_base - s.p_lo).array() < -kFeasTol).any() ||
        ((s.p_hi - s.p_base).array() < -kFeasTol).any())
        throw Error("DerSpec: baseline power outside [p_lo, p_hi]");
    const Profile eb = s.e_base(grid);
    if (((eb - s.e_lo).array() < -kFeasTol).any() || ((s.e_hi - eb).array() < -kFeasTol).any())
        throw Error("DerSpec: baseline energy outside [e_lo, e_hi]");
    for (const Profile* c : {&s.c_p_up, &s.c_p_dn, &s.c_e_up, &s.c_e_dn})
        if ((c->array() < 0).any()) throw Error("DerSpec: negative cost coefficient");
}

bool is_feasible(const DerSpec& s, const Profile& p, const TimeGrid& grid, double tol) {
    if (p.size() != grid.T) return false;
    if (((p - s.p_lo).array() < -tol).any() || ((s.p_hi - p).array() < -tol).any()) return false;
    const Profile e = s.energy(p, grid);
    return !(((e - s.e_lo).array() < -tol).any() || ((s.e_hi - e).array() < -tol).any());
}

ActivatedRanges ActivatedRanges::zero(int T) {
    return {Profile::Zero(T), Profile::Zero(T), Profile::Zero(T), Profile::Zero(T)};
}

double flexibility_cost(const DerSpec& s, const ActivatedRanges& a, const TimeGrid& grid) {
    for (const Profile* v : {&a.dp_up, &a.dp_dn, &a.de_up, &a.de_dn}) {
        grid.check_length(*v, "ActivatedRanges");
        if ((v->array() < 0).any()) throw Error("ActivatedRanges: negative range component");
    }
    const Profile eb = s.e_base(grid);
    if (((s.p_base + a.dp_up - s.p_hi).array() > kFeasTol).any() ||
        ((s.p_lo - (s.p_base - a.dp_dn)).array() > kFeasTol).any() ||
        ((eb + a.de_up - s.e_hi).array() > kFeasTol).any() ||
        ((s.e_lo - (eb - a.de_dn)).array() > kFeasTol).any())
        throw Error("ActivatedRanges: range exceeds the DER's physical bounds");
    return s.c_p_up.dot(a.dp_up) + s.c_p_dn.dot(a.dp_dn) + s.c_e_up.dot(a.de_up) +
           s.c_e_dn.dot(a.de_dn);
}

namespace {

DerSpec blank(DerKind kind, int T) {
    DerSpec s;
    s.kind = kind;
    s.p_base = s.p_lo = s.p_hi = Profile::Zero(T);
    s.e_lo = s.e_hi = Profile::Zero(T);
    s.c_p_up = s.c_p_dn = s.c_e_up = s.c_e_dn = Profile::Zero(T);
    return s;
}

void check_checkpoint(int k, int T, const char* what) {
    if (k < 1 || k > T)
        throw Error(std::string(what) + ": checkpoint " + std::to_string(k) + " outside [1, " +
                    std::to_string(T) + "]");
}

}  // namespace

DerSpec build_ev_spec(const EvParams& ev, const TimeGrid& grid) {
    grid.validate();
    const int T = grid.T;
    if (!(0 <= ev.arrive_slot && ev.arrive_slot < ev.depart_slot && ev.depart_slot <= T))
        throw Error("EV: require 0 <= arrive < depart <= T");
    if (!(ev.p_rated_kw > 0)) throw Error("EV: rated power must be > 0");
    if (!(0 <= ev.e_min_kwh && ev.e_min_kwh <= ev.e_expected_kwh &&
          ev.e_expected_kwh <= ev.capacity_kwh))
        throw Error("EV: require 0 <= e_min <= e_expected <= capacity");
    if (ev.comp_departure < 0) throw Error("EV: negative compensation");
    const double per_slot = ev.p_rated_kw * grid.dt;
    const int window = ev.depart_slot - ev.arrive_slot;
    if (ev.e_expected_kwh > per_slot * window + kFeasTol)
        throw Error("EV: expected energy unreachable at rated power within the plug-in window");

    DerSpec s = blank(DerKind::EV, T);
    const int last = ev.depart_slot - 1;
    double charged = 0.0;
    for (int t = 0; t < T; ++t) {
        const bool plugged = t >= ev.arrive_slot && t <= last;
        if (plugged) {
            s.p_hi(t) = ev.p_rated_kw;
            s.p_base(t) = std::min(ev.p_rated_kw, (ev.e_expected_kwh - charged) / grid.dt);
            charged += s.p_base(t) * grid.dt;
        }
        if (t >= ev.arrive_slot) {
            const int slots_done = std::min(t, last) - ev.arrive_slot + 1;
            s.e_hi(t) = std::min(ev.capacity_kwh, per_slot * slots_done);
            const int slots_left = std::max(0, last - t);
            s.e_lo(t) = std::max(0.0, ev.e_min_kwh - per_slot * slots_left);
        }
    }
    s.c_e_dn(last) += ev.comp_departure;
    for (const auto& [k, c] : ev.comp_interim) {
        check_checkpoint(k, T, "EV interim compensation");
        if (c < 0) throw Error("EV: negative compensation");
        s.c_e_dn(k - 1) += c;
    }
    validate(s, grid);
    return s;
}

DerSpec build_bess_spec(const BessParams& b, const TimeGrid& grid, Warnings* warnings) {
    grid.validate();
    const int T = grid.T;
    if (!(0 <= b.e0_kwh && b.e0_kwh <= b.capacity_kwh)) throw Error("BESS: require 0 <= e0 <= capacity");
    if (b.p_ch_max_kw < 0 || b.p_dis_max_kw < 0) throw Error("BESS: negative power limit");
    const double term_up = b.terminal_comp_up.value_or(2.0 * b.comp_up);
    const double term_dn = b.terminal_comp_dn.value_or(2.0 * b.comp_dn);
    if (b.comp_up < 0 || b.comp_dn < 0 || term_up < 0 || term_dn < 0)
        throw Error("BESS: negative compensation");
    for (std::size_t i = 0; i < b.balance_slots.size(); ++i) {
        check_checkpoint(b.balance_slots[i], T, "BESS balance slot");
        if (i > 0 && b.balance_slots[i] <= b.balance_slots[i - 1])
            throw Error("BESS: balance slots must be strictly increasing");
    }
    if (warnings && b.comp_dn < b.comp_up)
        warnings->push_back("BESS: deficit compensation below surplus compensation");

    DerSpec s = blank(DerKind::BESS, T);
    s.p_lo.setConstant(-b.p_dis_max_kw);
    s.p_hi.setConstant(b.p_ch_max_kw);
    s.e_offset = b.e0_kwh;
    s.e_lo.setZero();
    s.e_hi.setConstant(b.capacity_kwh);
    for (int k : b.balance_slots) {
        const bool terminal = k == T;
        s.c_e_up(k - 1) = terminal ? term_up : b.comp_up;
        s.c_e_dn(k - 1) = terminal ? term_dn : b.comp_dn;
        if (terminal && warnings && b.balance_slots.size() > 1 &&
            !(term_up > b.comp_up && term_dn > b.comp_dn))
            warnings->push_back("BESS: end-of-horizon compensation not above interim compensation");
    }
    if (b.hard_terminal) s.e_lo(T - 1) = s.e_hi(T - 1) = b.e0_kwh;
    validate(s, grid);
    return s;
}

DerSpec build_hp_spec(const HpThermalSpec& hp, double p_max_kw, const TimeGrid& grid,
                      Warnings* warnings) {
    hp.validate(grid);
    if (!(p_max_kw > 0)) throw Error("HP: p_max must be > 0");
    const int T = grid.T;
    const Eigen::MatrixXd D = hp_matrix_D(hp, grid);

    DerSpec s = blank(DerKind::HP, T);
    s.p_base = hp_baseline_power(hp, grid);
    s.p_lo.setZero();
    s.p_hi.setConstant(p_max_kw);
    if ((s.p_base.array() < 0).any() || (s.p_base.array() > p_max_kw).any()) {
        if (warnings) {
            std::ostringstream os;
            os << "HP: set-point baseline power leaves [0, " << p_max_kw << "] (min "
               << s.p_base.minCoeff() << ", max " << s.p_base.maxCoeff() << ")";
            warnings->push_back(os.str());
        }
        s.p_lo = s.p_lo.cwiseMin(s.p_base);
        s.p_hi = s.p_hi.cwiseMax(s.p_base);
    }
    const Profile eb = s.e_base(grid);
    s.e_hi = eb + D * hp.dtheta_up_max;
    s.e_lo = eb - D * hp.dtheta_dn_max;

    const auto coeffs = [&](const Profile& rho, const char* name) {
        Profile c = D.transpose().triangularView<Eigen::Upper>().solve(rho);
        const double scale = std::max(1.0, rho.cwiseAbs().maxCoeff());
        if ((c.array() < -1e-12 * scale).any())
            throw Error(std::string("HP: ") + name +
                        " yields negative energy cost coefficients");
        return c.cwiseMax(0.0).eval();
    };
    s.c_e_up = coeffs(hp.rho_up, "rho_up");
    s.c_e_dn = coeffs(hp.rho_dn, "rho_dn");
    validate(s, grid);
    return s;
}

DerSpec make_curtailable_spec(Profile p_base, Profile p_lo, Profile p_hi, Profile c_p_up,
                              Profile c_p_dn, const TimeGrid& grid) {
    DerSpec s = blank(DerKind::PV_CURTAILABLE, grid.T);
    s.p_base = std::move(p_base);
    s.p_lo = std::move(p_lo);
    s.p_hi = std::move(p_hi);
    s.c_p_up = std::move(c_p_up);
    s.c_p_dn = std::move(c_p_dn);
    // Energy is unconstrained beyond what the power box implies.
    Profile lo(grid.T), hi(grid.T);
    double acc_lo = 0, acc_hi = 0;
    for (int t = 0; t < grid.T; ++t) {
        acc_lo += s.p_lo(t) * grid.dt;
        acc_hi += s.p_hi(t) * grid.dt;
        lo(t) = acc_lo;
        hi(t) = acc_hi;
    }
    s.e_lo = lo;
    s.e_hi = hi;
    validate(s, grid);
    return s;
}

}  // namespace dsoflex
