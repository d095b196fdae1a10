#include "dsoflex/der_flex.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace dsoflex;
using testing::uniform;

namespace {

HpThermalSpec make_hp(int T, double C, double H, double eta) {
    HpThermalSpec hp;
    hp.capacitance = C;
    hp.conductance = H;
    hp.cop = eta;
    hp.theta_amb = Profile::Constant(T, 278.0);
    hp.theta_set = Profile::Constant(T, 293.0);
    hp.theta0 = 293.0;
    hp.rho_up = hp.rho_dn = Profile::Zero(T);
    hp.dtheta_up_max = hp.dtheta_dn_max = Profile::Ones(T);
    return hp;
}

HpThermalSpec random_hp(std::mt19937_64& rng, int T) {
    HpThermalSpec hp = make_hp(T, uniform(rng, 5, 15), uniform(rng, 0.1, 0.5), uniform(rng, 2.5, 4.0));
    hp.theta_amb = testing::random_profile(rng, T, 268, 288);
    hp.theta_set = testing::random_profile(rng, T, 291, 295);
    hp.theta0 = uniform(rng, 291, 295);
    return hp;
}

// C chosen so that exp(-dt*H/C) equals alpha.
double capacitance_for(double alpha, double H, double dt) { return dt * H / -std::log(alpha); }

}  // namespace

TEST_CASE("flexibility cost of zero activation is zero") {
    const TimeGrid g{3, 1.0};
    const DerSpec s = build_ev_spec({30, 10, 0, 3, 20, 10, 0.02, {}}, g);
    CHECK(flexibility_cost(s, ActivatedRanges::zero(3), g) == 0.0);
}

TEST_CASE("flexibility cost is the four-term dot product") {
    const TimeGrid g{2, 1.0};
    DerSpec s = make_curtailable_spec(Profile::Zero(2), Profile::Constant(2, -10), Profile::Constant(2, 10),
                                      Profile::Zero(2), Profile::Zero(2), g);
    s.c_e_up << 0, 0.02;
    s.c_e_dn << 0, 0.02;
    ActivatedRanges a = ActivatedRanges::zero(2);
    a.de_dn << 0, 5;
    CHECK(flexibility_cost(s, a, g) == doctest::Approx(0.10).epsilon(1e-14));

    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int T = 6;
        const TimeGrid gt{T, 0.5};
        DerSpec d = make_curtailable_spec(Profile::Zero(T), Profile::Constant(T, -5), Profile::Constant(T, 5),
                                          testing::random_profile(rng, T, 0, 1),
                                          testing::random_profile(rng, T, 0, 1), gt);
        d.c_e_up = testing::random_profile(rng, T, 0, 1);
        d.c_e_dn = testing::random_profile(rng, T, 0, 1);
        ActivatedRanges r{testing::random_profile(rng, T, 0, 5), testing::random_profile(rng, T, 0, 5),
                          Profile::Zero(T), Profile::Zero(T)};
        for (int t = 0; t < T; ++t) {
            r.de_up(t) = uniform(rng, 0, 2.5 * (t + 1));
            r.de_dn(t) = uniform(rng, 0, 2.5 * (t + 1));
        }
        double oracle = 0;
        for (int t = 0; t < T; ++t) {
            oracle += d.c_p_up[t] * r.dp_up[t];
            oracle += d.c_p_dn[t] * r.dp_dn[t];
            oracle += d.c_e_up[t] * r.de_up[t];
            oracle += d.c_e_dn[t] * r.de_dn[t];
        }
        CHECK(flexibility_cost(d, r, gt) == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("flexibility cost rejects negative ranges") {
    const TimeGrid g{2, 1.0};
    const DerSpec s = build_ev_spec({30, 10, 0, 2, 10, 0, 0, {}}, g);
    ActivatedRanges a = ActivatedRanges::zero(2);
    a.dp_up(0) = -1;
    CHECK_THROWS_AS(flexibility_cost(s, a, g), Error);
}

TEST_CASE("EV baseline charges at rated power from plug-in") {
    const TimeGrid g{6, 1.0};
    const DerSpec s = build_ev_spec({40, 10, 0, 4, 20, 20, 0.02, {}}, g);
    Profile expect(6);
    expect << 10, 10, 0, 0, 0, 0;
    CHECK((s.p_base - expect).cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.p_hi(3) == 10.0);
    CHECK(s.p_hi(4) == 0.0);
    CHECK(s.e_base(g)(3) == doctest::Approx(20.0));
    CHECK(is_feasible(s, s.p_base, g));
}

TEST_CASE("EV with collapsed energy requirements has no energy flexibility at departure") {
    const TimeGrid g{4, 1.0};
    const DerSpec s = build_ev_spec({20, 10, 1, 3, 20, 20, 0.02, {}}, g);
    CHECK(s.e_lo(2) == doctest::Approx(20.0));
    CHECK(s.e_hi(2) == doctest::Approx(20.0));
}

TEST_CASE("EV compensation sits at departure and the 23:00 checkpoint only") {
    const TimeGrid g{24, 1.0};
    const DerSpec s = build_ev_spec({40, 11, 8, 17, 30, 10, 0.02, {{23, 0.01}}}, g);
    int nonzero = 0;
    for (int t = 0; t < 24; ++t) nonzero += s.c_e_dn(t) != 0.0;
    CHECK(nonzero == 2);
    CHECK(s.c_e_dn(16) == doctest::Approx(0.02));
    CHECK(s.c_e_dn(22) == doctest::Approx(0.01));
    CHECK(s.c_e_up.isZero());
    CHECK(s.c_p_up.isZero());
    CHECK(s.c_p_dn.isZero());
    CHECK(s.e_lo(16) == doctest::Approx(10.0));
    CHECK(s.e_hi(16) == doctest::Approx(40.0));
}

TEST_CASE("EV rejects unreachable energy") {
    CHECK_THROWS_AS(build_ev_spec({40, 5, 0, 2, 20, 0, 0, {}}, {4, 1.0}), Error);
    CHECK_THROWS_AS(build_ev_spec({40, 5, 3, 2, 5, 0, 0, {}}, {4, 1.0}), Error);
}

TEST_CASE("BESS coefficients at 8:00 and 16:00") {
    const TimeGrid g{24, 1.0};
    BessParams b{200, 50, 50, 100, {8, 16}, 0.004, 0.008, {}, {}, true};
    Warnings w;
    const DerSpec s = build_bess_spec(b, g, &w);
    CHECK(w.empty());
    for (int t = 0; t < 24; ++t) {
        const bool bal = t == 7 || t == 15;
        CHECK(s.c_e_up(t) == doctest::Approx(bal ? 0.004 : 0.0));
        CHECK(s.c_e_dn(t) == doctest::Approx(bal ? 0.008 : 0.0));
    }
    CHECK(s.p_base.isZero());
    CHECK(s.p_lo(0) == -50.0);
    CHECK(s.e_base(g).isApproxToConstant(100.0));
}

TEST_CASE("BESS hard terminal pins the final state of charge") {
    const TimeGrid g{6, 1.0};
    const DerSpec s = build_bess_spec({100, 20, 20, 50, {}, 0, 0, {}, {}, true}, g);
    CHECK(s.e_lo(5) == 50.0);
    CHECK(s.e_hi(5) == 50.0);
}

TEST_CASE("BESS without balance times is free to use") {
    const TimeGrid g{6, 1.0};
    const DerSpec s = build_bess_spec({100, 20, 20, 50, {}, 0.004, 0.008, {}, {}, false}, g);
    CHECK(s.c_e_up.isZero());
    CHECK(s.c_e_dn.isZero());
    ActivatedRanges a = ActivatedRanges::zero(6);
    a.dp_up.setConstant(20);
    a.de_up.setConstant(50);
    CHECK(flexibility_cost(s, a, g) == 0.0);
}

TEST_CASE("BESS end-of-horizon compensation exceeds interim") {
    const TimeGrid g{6, 1.0};
    const DerSpec s = build_bess_spec({100, 20, 20, 50, {3, 6}, 0.004, 0.008, {}, {}, false}, g);
    CHECK(s.c_e_up(5) > s.c_e_up(2));
    CHECK(s.c_e_dn(5) > s.c_e_dn(2));
}

TEST_CASE("BESS inverted compensation is a warning") {
    Warnings w;
    CHECK_NOTHROW(build_bess_spec({100, 20, 20, 50, {3}, 0.008, 0.004, {}, {}, false}, {6, 1.0}, &w));
    CHECK(w.size() == 1);
    CHECK_THROWS_AS(build_bess_spec({100, 20, 20, 50, {4, 3}, 0, 0, {}, {}, false}, {6, 1.0}), Error);
}

TEST_CASE("HP matrix D for one slot") {
    const TimeGrid g{1, 0.5};
    const HpThermalSpec hp = make_hp(1, 10, 0.3, 3.0);
    const Eigen::MatrixXd D = hp_matrix_D(hp, g);
    CHECK(D(0, 0) == doctest::Approx(0.5 * 0.3 / 3.0).epsilon(1e-15));
}

TEST_CASE("HP matrix D for three slots at alpha one half") {
    const TimeGrid g{3, 1.0};
    const HpThermalSpec hp = make_hp(3, capacitance_for(0.5, 2.0, 1.0), 2.0, 1.0);
    Eigen::Matrix3d expect;
    expect << 2, 0, 0, 1, 2, 0, 1, 1, 2;
    CHECK((hp_matrix_D(hp, g) - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("HP matrix D equals dt (H/eta) L A^-1 and is invertible") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const TimeGrid g{24, uniform(rng, 0.25, 1.0)};
        const HpThermalSpec hp = random_hp(rng, 24);
        const Eigen::MatrixXd D = hp_matrix_D(hp, g);
        const Eigen::MatrixXd L = prefix_sum_matrix<double>(24);
        const Eigen::MatrixXd A = thermal_transfer_matrix(hp.alpha(g.dt), 24);
        const Eigen::MatrixXd ref = g.dt * (hp.conductance / hp.cop) * L * A.inverse();
        CHECK((D - ref).cwiseAbs().maxCoeff() < 1e-12);
        const Eigen::MatrixXd I = D * D.inverse();
        CHECK((I - Eigen::MatrixXd::Identity(24, 24)).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((D.triangularView<Eigen::Lower>().toDenseMatrix().array() > 0).count() == 24 * 25 / 2);
    }
}

TEST_CASE("HP baseline at thermal equilibrium is zero") {
    const TimeGrid g{4, 1.0};
    HpThermalSpec hp = make_hp(4, 10, 0.3, 3.0);
    hp.theta_amb = hp.theta_set;
    CHECK(hp_baseline_power(hp, g).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("HP baseline under a 10 K offset is 10 H / eta") {
    const TimeGrid g{4, 1.0};
    HpThermalSpec hp = make_hp(4, 10, 0.3, 3.0);
    hp.theta_amb.setConstant(283.0);
    CHECK((hp_baseline_power(hp, g).array() - 10 * 0.3 / 3.0).abs().maxCoeff() < 1e-10);
}

TEST_CASE("HP baseline reproduces the set point under forward simulation") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const TimeGrid g{24, 1.0};
        const HpThermalSpec hp = random_hp(rng, 24);
        const Profile th = simulate_temperature(hp, hp_baseline_power(hp, g), g);
        CHECK((th - hp.theta_set).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("HP constant-rho coefficients follow the closed form") {
    const TimeGrid g{24, 1.0};
    HpThermalSpec hp = make_hp(24, 10, 0.25, 3.0);
    hp.theta_amb.setConstant(283.0);
    const double rho0 = 0.01 * 0.25 / 3.0;
    hp.rho_dn.setConstant(rho0);
    const DerSpec s = build_hp_spec(hp, 4.0, g);
    const double a = hp.alpha(g.dt);
    for (int t = 1; t <= 24; ++t)
        CHECK(std::abs(s.c_e_dn(t - 1) - (3.0 / (0.25 * g.dt)) * rho0 * std::pow(a, 24 - t)) < 1e-9);
    for (int t = 1; t < 24; ++t) CHECK(s.c_e_dn(t) / s.c_e_dn(t - 1) == doctest::Approx(1 / a));
    CHECK(s.c_e_up.isZero());
    CHECK(s.c_p_up.isZero());
}

TEST_CASE("HP coefficients satisfy D' c = rho") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        const TimeGrid g{24, 1.0};
        HpThermalSpec hp = random_hp(rng, 24);
        hp.rho_up.setConstant(uniform(rng, 0, 0.01));
        hp.rho_dn.setConstant(uniform(rng, 0, 0.01));
        const DerSpec s = build_hp_spec(hp, 1e3, g);
        const Eigen::MatrixXd D = hp_matrix_D(hp, g);
        CHECK((D.transpose() * s.c_e_up - hp.rho_up).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((D.transpose() * s.c_e_dn - hp.rho_dn).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("HP energy bounds are the temperature box mapped through D") {
    const TimeGrid g{6, 1.0};
    HpThermalSpec hp = make_hp(6, 10, 0.25, 3.0);
    hp.theta_amb.setConstant(283.0);
    const DerSpec s = build_hp_spec(hp, 4.0, g);
    const Eigen::MatrixXd D = hp_matrix_D(hp, g);
    const Profile eb = s.e_base(g);
    CHECK((s.e_hi - eb - D * hp.dtheta_up_max).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((eb - s.e_lo - D * hp.dtheta_dn_max).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("HP rejects rho profiles that give negative coefficients") {
    const TimeGrid g{3, 1.0};
    HpThermalSpec hp = make_hp(3, 10, 0.25, 3.0);
    hp.theta_amb.setConstant(283.0);
    hp.rho_dn << 0.0, 0.0, 0.01;
    CHECK_THROWS_AS(build_hp_spec(hp, 4.0, g), Error);
}

TEST_CASE("HP zero rho gives zero coefficients") {
    const TimeGrid g{4, 1.0};
    HpThermalSpec hp = make_hp(4, 10, 0.25, 3.0);
    hp.theta_amb.setConstant(283.0);
    const DerSpec s = build_hp_spec(hp, 4.0, g);
    CHECK(s.c_e_up.isZero());
    CHECK(s.c_e_dn.isZero());
}

TEST_CASE("HP baseline outside the power range is widened with a warning") {
    const TimeGrid g{4, 1.0};
    HpThermalSpec hp = make_hp(4, 10, 0.25, 3.0);
    hp.theta_amb.setConstant(300.0);
    Warnings w;
    const DerSpec s = build_hp_spec(hp, 4.0, g, &w);
    CHECK(w.size() == 1);
    CHECK(s.p_lo.minCoeff() < 0);
    CHECK(is_feasible(s, s.p_base, g));
}

TEST_CASE("temperature deviation of the baseline is zero") {
    const TimeGrid g{5, 1.0};
    HpThermalSpec hp = make_hp(5, 10, 0.25, 3.0);
    CHECK(temperature_deviation(hp, hp_baseline_power(hp, g), g).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("temperature deviation of a unit bump decays geometrically") {
    const TimeGrid g{3, 1.0};
    const HpThermalSpec hp = make_hp(3, capacitance_for(0.5, 1.0, 1.0), 1.0, 1.0);
    Profile p = hp_baseline_power(hp, g);
    p(0) += 1.0;
    const Profile dev = temperature_deviation(hp, p, g);
    CHECK(dev(0) == doctest::Approx(0.5));
    CHECK(dev(1) == doctest::Approx(0.25));
    CHECK(dev(2) == doctest::Approx(0.125));
}

TEST_CASE("temperature deviation matches forward simulation") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const TimeGrid g{24, 1.0};
        const HpThermalSpec hp = random_hp(rng, 24);
        const Profile p = testing::random_profile(rng, 24, 0, 4);
        const Profile sim = simulate_temperature(hp, p, g) - hp.theta_set;
        CHECK((temperature_deviation(hp, p, g) - sim).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("energy deviation equals D (eta/H) A times the power deviation") {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        const TimeGrid g{24, uniform(rng, 0.25, 1.0)};
        const HpThermalSpec hp = random_hp(rng, 24);
        const Profile dp = testing::random_profile(rng, 24, -2, 2);
        const Eigen::MatrixXd L = prefix_sum_matrix<double>(24);
        const Eigen::MatrixXd A = thermal_transfer_matrix(hp.alpha(g.dt), 24);
        const Profile lhs = g.dt * L * dp;
        const Profile rhs = hp_matrix_D(hp, g) * (hp.gain() * A * dp);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("simulated deviation carries the extra (1 - alpha) factor") {
    // Forward simulation gives theta - theta_set = (1 - alpha)(eta/H) A dp, so the
    // cumulative energy deviation equals D (theta - theta_set) / (1 - alpha).
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const TimeGrid g{24, 1.0};
        const HpThermalSpec hp = random_hp(rng, 24);
        const Profile pb = hp_baseline_power(hp, g);
        const Profile p = pb + testing::random_profile(rng, 24, -1, 1);
        const Profile de = g.dt * prefix_sum_matrix<double>(24) * (p - pb);
        const Profile dev = simulate_temperature(hp, p, g) - hp.theta_set;
        const double a = hp.alpha(g.dt);
        CHECK((de - hp_matrix_D(hp, g) * dev / (1 - a)).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("per-slot power box does not transform into the temperature box") {
    // Slot-wise scaling bounds |dp_t| by dtheta * H / (eta (1 - alpha)); holding that
    // bound for consecutive slots accumulates past dtheta.
    const TimeGrid g{3, 1.0};
    const HpThermalSpec hp = make_hp(3, capacitance_for(0.5, 1.0, 1.0), 1.0, 1.0);
    const double box = 1.0 * hp.conductance / (hp.cop * (1 - hp.alpha(g.dt)));
    Profile p = hp_baseline_power(hp, g);
    p.array() += box;
    const Profile dev = temperature_deviation(hp, p, g);
    CHECK(dev(0) == doctest::Approx(1.0));
    CHECK(dev(1) == doctest::Approx(1.5));
    CHECK(dev(2) == doctest::Approx(1.75));
    CHECK(dev.maxCoeff() > hp.dtheta_up_max.maxCoeff());
}

TEST_CASE("every builder produces a region containing its baseline") {
    std::mt19937_64 rng(29);
    const TimeGrid g{24, 1.0};
    for (int trial = 0; trial < 20; ++trial) {
        const int arrive = static_cast<int>(uniform(rng, 0, 12));
        const int depart = arrive + 4 + static_cast<int>(uniform(rng, 0, 8));
        const DerSpec ev = build_ev_spec({60, 11, arrive, depart, 30, 15, 0.02, {}}, g);
        CHECK(is_feasible(ev, ev.p_base, g));
        CHECK(ev.e_base(g)(depart - 1) == doctest::Approx(30.0));
        const DerSpec bess = build_bess_spec({200, 50, 50, uniform(rng, 0, 200), {8, 16}, 0.004, 0.008, {}, {}, true}, g);
        CHECK(is_feasible(bess, bess.p_base, g));
        HpThermalSpec hp = random_hp(rng, 24);
        const DerSpec h = build_hp_spec(hp, 10.0, g);
        CHECK(is_feasible(h, h.p_base, g));
    }
}
