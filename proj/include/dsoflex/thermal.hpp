#ifndef DSOFLEX_THERMAL_HPP
#define DSOFLEX_THERMAL_HPP

// First-order thermal model of a heat-pump heated building and the linear map
// between indoor-temperature deviations and accumulated-energy deviations.
//
//   theta_t = a * theta_{t-1} + (1 - a) * (theta_amb_t + (eta / H) * p_t),
//   a = exp(-dt * H / C).
//
// All routines are templated on the scalar so the identities can be checked
// in extended precision.

#include "dsoflex/common.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace dsoflex {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct HpThermal {
    Scalar capacitance{};   ///< C, kWh/K
    Scalar conductance{};   ///< H, kW/K (enters as dt*H/C and eta/H)
    Scalar cop{};           ///< eta
    VectorX<Scalar> theta_amb;      ///< K, length T
    VectorX<Scalar> theta_set;      ///< K, length T
    Scalar theta0{};                ///< K
    VectorX<Scalar> rho_up;         ///< EUR/K, length T
    VectorX<Scalar> rho_dn;         ///< EUR/K, length T
    VectorX<Scalar> dtheta_up_max;  ///< K, length T
    VectorX<Scalar> dtheta_dn_max;  ///< K, length T

    Scalar alpha(double dt) const {
        using std::exp;
        return exp(-Scalar(dt) * conductance / capacitance);
    }

    /// eta / H: steady-state temperature rise per kW of electric input.
    Scalar gain() const { return cop / conductance; }

    void validate(const TimeGrid& grid) const {
        grid.validate();
        if (!(capacitance > 0)) throw Error("HpThermal: capacitance must be > 0");
        if (!(conductance > 0)) throw Error("HpThermal: conductance must be > 0");
        if (!(cop > 0)) throw Error("HpThermal: cop must be > 0");
        const auto check = [&](const VectorX<Scalar>& v, const char* name) {
            if (v.size() != grid.T)
                throw Error(std::string("HpThermal: ") + name + " has wrong length");
        };
        check(theta_amb, "theta_amb");
        check(theta_set, "theta_set");
        check(rho_up, "rho_up");
        check(rho_dn, "rho_dn");
        check(dtheta_up_max, "dtheta_up_max");
        check(dtheta_dn_max, "dtheta_dn_max");
        const Scalar a = alpha(grid.dt);
        if (!(a > 0 && a < 1)) throw Error("HpThermal: alpha outside (0,1)");
        if ((dtheta_up_max.array() < 0).any() || (dtheta_dn_max.array() < 0).any())
            throw Error("HpThermal: negative temperature deviation limit");
    }
};

using HpThermalSpec = HpThermal<double>;

/// L: lower-triangular all-ones matrix (cumulative sum).
template <typename Scalar>
MatrixX<Scalar> prefix_sum_matrix(int T) {
    MatrixX<Scalar> L = MatrixX<Scalar>::Zero(T, T);
    L.template triangularView<Eigen::Lower>().setOnes();
    return L;
}

/// A: A(i,j) = a^(i-j) for i >= j.
template <typename Scalar>
MatrixX<Scalar> thermal_transfer_matrix(Scalar a, int T) {
    MatrixX<Scalar> A = MatrixX<Scalar>::Zero(T, T);
    for (int j = 0; j < T; ++j) {
        Scalar v(1);
        for (int i = j; i < T; ++i) {
            A(i, j) = v;
            v *= a;
        }
    }
    return A;
}

/// D = dt * (H/eta) * L * A^{-1}; unit-lower structure with (1 - a) below the diagonal.
template <typename Scalar>
MatrixX<Scalar> hp_matrix_D(const HpThermal<Scalar>& hp, const TimeGrid& grid) {
    hp.validate(grid);
    const int T = grid.T;
    const Scalar a = hp.alpha(grid.dt);
    const Scalar scale = Scalar(grid.dt) / hp.gain();
    MatrixX<Scalar> D = MatrixX<Scalar>::Zero(T, T);
    for (int i = 0; i < T; ++i) {
        D(i, i) = scale;
        for (int j = 0; j < i; ++j) D(i, j) = scale * (Scalar(1) - a);
    }
    return D;
}

/// Power profile that holds the indoor temperature exactly on the set point.
template <typename Scalar>
VectorX<Scalar> hp_baseline_power(const HpThermal<Scalar>& hp, const TimeGrid& grid) {
    hp.validate(grid);
    const Scalar a = hp.alpha(grid.dt);
    VectorX<Scalar> p(grid.T);
    Scalar prev = hp.theta0;
    for (int t = 0; t < grid.T; ++t) {
        p(t) = ((hp.theta_set(t) - a * prev) / (Scalar(1) - a) - hp.theta_amb(t)) / hp.gain();
        prev = hp.theta_set(t);
    }
    return p;
}

/// Forward recursion of the thermal model from theta0.
template <typename Scalar>
VectorX<Scalar> simulate_temperature(const HpThermal<Scalar>& hp, const VectorX<Scalar>& p,
                                     const TimeGrid& grid) {
    hp.validate(grid);
    if (p.size() != grid.T) throw Error("simulate_temperature: power profile length");
    const Scalar a = hp.alpha(grid.dt);
    VectorX<Scalar> theta(grid.T);
    Scalar prev = hp.theta0;
    for (int t = 0; t < grid.T; ++t) {
        theta(t) = a * prev + (Scalar(1) - a) * (hp.theta_amb(t) + hp.gain() * p(t));
        prev = theta(t);
    }
    return theta;
}

/// theta - theta_set for power profile p; the recursion runs on deviations only,
/// which equals simulating from theta0 and subtracting the set point.
template <typename Scalar>
VectorX<Scalar> temperature_deviation(const HpThermal<Scalar>& hp, const VectorX<Scalar>& p,
                                      const TimeGrid& grid) {
    const VectorX<Scalar> dp = p - hp_baseline_power(hp, grid);
    const Scalar a = hp.alpha(grid.dt);
    VectorX<Scalar> dev(grid.T);
    Scalar prev(0);
    for (int t = 0; t < grid.T; ++t) {
        dev(t) = a * prev + (Scalar(1) - a) * hp.gain() * dp(t);
        prev = dev(t);
    }
    return dev;
}

}  // namespace dsoflex

#endif  // DSOFLEX_THERMAL_HPP
