#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace thermid {

/// Physical parameters of the 2R2C zone/wall thermal network.
///
/// Units are chosen so no hidden conversion factors appear anywhere:
/// capacitances in kWh/degC, resistances in degC/kW, effective solar
/// aperture in m^2. Time constants then come out in hours, heat flows
/// in kW and temperatures in degC.
struct RcParams {
  double Cz;  ///< zone thermal capacitance (kWh/degC)
  double Cw;  ///< wall thermal capacitance (kWh/degC)
  double Rz;  ///< zone-wall resistance (degC/kW)
  double Rw;  ///< wall-ambient resistance (degC/kW)
  double Ae;  ///< effective solar aperture (m^2)
};

/// Default sampling period in hours (5 minutes). Config value only; the
/// math below takes the period as an argument everywhere.
inline constexpr double kDefaultSamplingHours = 1.0 / 12.0;

/// Built-in truth preset used by the scenario generator and the tests.
/// Not calibrated against any real building: values are picked so the RC
/// products are of the order of a few hours and the disturbance filter
/// coefficient eps0 stays well below 1 at the default sampling period.
inline constexpr RcParams kReferenceParams{2.0, 20.0, 1.0, 5.0, 10.0};

/// Throws std::invalid_argument naming the offending field. Capacitances
/// and resistances must be strictly positive; Ae = 0 is allowed (it only
/// zeroes the solar input column).
inline void validate(const RcParams& p) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0))
      throw std::invalid_argument(std::string("RcParams: ") + name +
                                  " must be > 0");
  };
  positive(p.Cz, "Cz");
  positive(p.Cw, "Cw");
  positive(p.Rz, "Rz");
  positive(p.Rw, "Rw");
  if (!(p.Ae >= 0.0))
    throw std::invalid_argument("RcParams: Ae must be >= 0");
}

/// Continuous-time realization xdot = F x + G u + H w, y = J x with
/// state x = [Tz, Tw], inputs u = [qhvac, Toa, etasol] and scalar
/// disturbance w = qint. F is in 1/h.
struct ContinuousStateSpace {
  Eigen::Matrix2d F;
  Eigen::Matrix<double, 2, 3> G;
  Eigen::Vector2d H;
  Eigen::RowVector2d J;
};

inline ContinuousStateSpace build_state_space(const RcParams& p) {
  validate(p);
  ContinuousStateSpace ss;
  ss.F << -1.0 / (p.Cz * p.Rz), 1.0 / (p.Cz * p.Rz),
      1.0 / (p.Cw * p.Rz), -(1.0 / p.Cw) * (1.0 / p.Rw + 1.0 / p.Rz);
  ss.G << 1.0 / p.Cz, 0.0, p.Ae / p.Cz,
      0.0, 1.0 / (p.Cw * p.Rw), 0.0;
  ss.H << 1.0 / p.Cz, 0.0;
  ss.J << 1.0, 0.0;
  return ss;
}

/// Coefficients of the characteristic polynomial s^2 + d1 s + d2 of the
/// zone transfer functions. d1 in 1/h, d2 in 1/h^2; both positive, and
/// d1^2 > 4 d2 for every valid parameter set (both poles real negative).
struct ContinuousDenominator {
  double d1;
  double d2;
};

inline ContinuousDenominator continuous_denominator(const RcParams& p) {
  validate(p);
  return {1.0 / (p.Cz * p.Rz) + (1.0 / p.Cw) * (1.0 / p.Rz + 1.0 / p.Rw),
          1.0 / (p.Cz * p.Cw * p.Rz * p.Rw)};
}

/// Largest admissible sampling period (hours) for the bilinear map below:
/// below this bound the discrete coefficients provably carry the sign
/// pattern encoded in build_constraints().
inline double sampling_bound(const RcParams& p) {
  validate(p);
  const double l = 2.0 * p.Cw * p.Rw * p.Rz / (p.Rz + p.Rw);
  const double m = 2.0 * std::sqrt(p.Rz * p.Cz * p.Rw * p.Cw);
  const double n =
      (2.0 / 3.0) * std::min({p.Rz * p.Cz, p.Rz * p.Cw, p.Rw * p.Cw});
  return std::min({l, m, n});
}

/// The 11 coefficients of the discrete-time model
///   y[k] = t1 y[k-1] + t2 y[k-2]
///        + t3 u1[k-2] + t4 u1[k-1] + t5 u1[k]
///        + t6 u2[k-2] + t7 u2[k-1] + t8 u2[k]
///        + t9 u3[k-2] + t10 u3[k-1] + t11 u3[k] + wbar[k].
/// theta(i) holds t_{i+1} (0-based storage, 1-based naming).
struct PlantParams {
  Eigen::Matrix<double, 11, 1> theta;
};

inline void require_admissible(const RcParams& p, double t_s) {
  if (!(t_s > 0.0 && t_s < sampling_bound(p)))
    throw std::invalid_argument(
        "sampling period must lie in (0, sampling_bound); got t_s=" +
        std::to_string(t_s));
}

/// Bilinear (Tustin) map from physical parameters to the discrete
/// coefficients. Requires 0 < t_s < sampling_bound(p); within that range
/// the output satisfies the full sign/stability/DC-gain constraint set
/// exactly, and the Toa channel has the structure t7 = 2 t6, t8 = t6.
inline PlantParams tustin_plant_params(const RcParams& p, double t_s) {
  require_admissible(p, t_s);
  const auto [d1, d2] = continuous_denominator(p);
  const double D0 = d2 * t_s * t_s + 2.0 * d1 * t_s + 4.0;
  const double f22 = -(1.0 / p.Cw) * (1.0 / p.Rw + 1.0 / p.Rz);
  const double f12 = 1.0 / (p.Cz * p.Rz);
  const double g11 = 1.0 / p.Cz;
  const double g22 = 1.0 / (p.Cw * p.Rw);
  const double g13 = p.Ae / p.Cz;

  // lag weights for the (s - f22)-type numerators: z^-2, z^-1, z^0 order
  const Eigen::Vector3d lag{-2.0 - f22 * t_s, -2.0 * f22 * t_s,
                            2.0 - f22 * t_s};

  PlantParams out;
  out.theta(0) = (8.0 - 2.0 * d2 * t_s * t_s) / D0;
  out.theta(1) = -(d2 * t_s * t_s - 2.0 * d1 * t_s + 4.0) / D0;
  out.theta.segment<3>(2) = (t_s / D0) * g11 * lag;
  const double c_oa = f12 * g22 * t_s * t_s / D0;
  out.theta(5) = c_oa;
  out.theta(6) = 2.0 * c_oa;
  out.theta(7) = c_oa;
  out.theta.segment<3>(8) = (t_s / D0) * g13 * lag;
  return out;
}

/// Coefficients of the two-lag filter that maps the raw disturbance w to
/// the transformed disturbance wbar (the quantity the identifier sees):
///   wbar[k] = beta0 w[k] + beta1 w[k-1] + beta2 w[k-2].
struct DisturbanceCoeffs {
  double beta0;
  double beta1;
  double beta2;
  double eps0;  ///< -f22 * t_s; small whenever the RC products are large
};

inline DisturbanceCoeffs tustin_disturbance_coeffs(const RcParams& p,
                                                   double t_s) {
  require_admissible(p, t_s);
  const auto [d1, d2] = continuous_denominator(p);
  const double D0 = d2 * t_s * t_s + 2.0 * d1 * t_s + 4.0;
  const double eps0 = (t_s / p.Cw) * (1.0 / p.Rw + 1.0 / p.Rz);
  const double s = t_s / (p.Cz * D0);
  return {s * (2.0 + eps0), s * 2.0 * eps0, s * (-2.0 + eps0), eps0};
}

/// Applies the two-lag disturbance filter. Input must have at least 3
/// samples; the result has size() - 2 entries (entry i corresponds to
/// sample i + 2 of w).
inline std::vector<double> transform_disturbance(std::span<const double> w,
                                                 const DisturbanceCoeffs& c) {
  if (w.size() < 3)
    throw std::invalid_argument(
        "transform_disturbance: need at least 3 samples, got " +
        std::to_string(w.size()));
  std::vector<double> wbar(w.size() - 2);
  for (std::size_t i = 0; i < wbar.size(); ++i)
    wbar[i] = c.beta0 * w[i + 2] + c.beta1 * w[i + 1] + c.beta2 * w[i];
  return wbar;
}

}  // namespace thermid
