#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermid/rc_model.hpp"

namespace thermid {

/// Fraction of entries that differ from their predecessor, using exact
/// floating-point comparison. Constant vectors score 0, strictly varying
/// ones score 1.
inline double change_frequency(std::span<const double> x) {
  if (x.size() < 2)
    throw std::invalid_argument("change_frequency: need at least 2 entries");
  std::size_t changes = 0;
  for (std::size_t k = 1; k < x.size(); ++k)
    if (x[k] != x[k - 1]) ++changes;
  return static_cast<double>(changes) / static_cast<double>(x.size() - 1);
}

/// Fraction of entries with |x_i| > eps. A vector is (eps, f)-sparse when
/// this fraction is at most f.
inline double eps_f_sparse(std::span<const double> x, double eps) {
  if (!(eps >= 0.0))
    throw std::invalid_argument("eps_f_sparse: eps must be >= 0");
  if (x.empty()) return 0.0;
  std::size_t outside = 0;
  for (double v : x)
    if (std::abs(v) > eps) ++outside;
  return static_cast<double>(outside) / static_cast<double>(x.size());
}

inline bool is_eps_f_sparse(std::span<const double> x, double eps, double f) {
  return eps_f_sparse(x, eps) <= f;
}

/// Sparsity diagnostics of the transformed disturbance relative to the
/// bound epsilon_bar = 4 t_s w_u eps0 / (Cz D0), with w_u = max |w|.
///
/// Exact counting: every transformed entry whose window satisfies
/// w[k] = w[k-2] lies inside [-eps_bar, eps_bar], and at most two windows
/// straddle each level change of w, so
///
///     count_outside  <=  2 * (number of level changes of w).
///
/// That count inequality is what `holds` reports. Note the two sides of
/// the popular fraction form live on different index sets (wbar has n-2
/// entries, change_frequency divides by n-1), so `fraction_outside` can
/// exceed `two_cf_bound` by a factor (n-1)/(n-2) even though the count
/// inequality is exact; `holds_fraction_form` records that stricter,
/// slightly over-tight comparison for reference.
struct SparsityReport {
  double epsilon_bar = 0.0;
  double w_peak = 0.0;
  double change_freq = 0.0;        ///< c_f(w)
  double fraction_outside = 0.0;   ///< count_outside / (n - 2)
  double two_cf_bound = 0.0;       ///< 2 c_f(w)
  std::size_t count_outside = 0;
  std::size_t count_allowed = 0;   ///< 2 * number of level changes
  bool hypothesis_infrequent = false;  ///< c_f(w) small enough to assert
  bool holds = false;                  ///< count_outside <= count_allowed
  bool holds_fraction_form = false;    ///< fraction_outside <= two_cf_bound
};

inline SparsityReport prop1_check(std::span<const double> w,
                                  const RcParams& p, double t_s) {
  require_admissible(p, t_s);
  if (w.size() < 3)
    throw std::invalid_argument("prop1_check: need at least 3 samples");
  const DisturbanceCoeffs c = tustin_disturbance_coeffs(p, t_s);
  const auto wbar = transform_disturbance(w, c);

  SparsityReport rep;
  for (double v : w) rep.w_peak = std::max(rep.w_peak, std::abs(v));
  const auto [d1, d2] = continuous_denominator(p);
  const double D0 = d2 * t_s * t_s + 2.0 * d1 * t_s + 4.0;
  rep.epsilon_bar = 4.0 / (p.Cz * D0) * t_s * rep.w_peak * c.eps0;
  rep.change_freq = change_frequency(w);
  rep.two_cf_bound = 2.0 * rep.change_freq;

  std::size_t changes = 0;
  for (std::size_t k = 1; k < w.size(); ++k)
    if (w[k] != w[k - 1]) ++changes;
  rep.count_allowed = 2 * changes;
  // A plateau sitting exactly at the peak level makes |wbar| equal to
  // epsilon_bar in exact arithmetic; the two quantities are computed along
  // different floating-point paths (three-term cancellation on one side),
  // so the comparison carries an ulp-scale guard far below any physical
  // magnitude.
  const double guard = rep.epsilon_bar * (1.0 + 1e-12);
  for (double v : wbar)
    if (std::abs(v) > guard) ++rep.count_outside;
  rep.fraction_outside = static_cast<double>(rep.count_outside) /
                         static_cast<double>(wbar.size());
  rep.hypothesis_infrequent = rep.change_freq <= 0.1;
  rep.holds = rep.count_outside <= rep.count_allowed;
  rep.holds_fraction_form = rep.fraction_outside <= rep.two_cf_bound;
  return rep;
}

enum class Channel { kQhvac, kToa, kEtasol };

inline const char* to_string(Channel c) {
  switch (c) {
    case Channel::kQhvac: return "qhvac";
    case Channel::kToa: return "Toa";
    case Channel::kEtasol: return "etasol";
  }
  return "unknown";
}

/// Magnitude response of one identified channel on an angular-frequency
/// grid (rad/h), evaluated on the unit circle at z = exp(j w t_s).
struct FrequencyResponse {
  Channel channel;
  double t_s;
  Eigen::VectorXd omegas;
  Eigen::VectorXd magnitudes;
};

inline double channel_gain(const PlantParams& p, Channel channel,
                           double omega, double t_s) {
  if (!(omega > 0.0 && omega <= M_PI / t_s + 1e-12))
    throw std::invalid_argument(
        "channel_gain: omega must lie in (0, pi/t_s], got " +
        std::to_string(omega));
  const std::complex<double> zinv = std::exp(std::complex<double>(0.0, -omega * t_s));
  const int base = channel == Channel::kQhvac ? 2
                   : channel == Channel::kToa ? 5
                                              : 8;
  const auto& t = p.theta;
  const std::complex<double> num =
      t(base) * zinv * zinv + t(base + 1) * zinv + t(base + 2);
  const std::complex<double> den = 1.0 - t(0) * zinv - t(1) * zinv * zinv;
  return std::abs(num / den);
}

inline FrequencyResponse frequency_response(const PlantParams& p,
                                            Channel channel,
                                            const Eigen::VectorXd& omegas,
                                            double t_s) {
  FrequencyResponse fr;
  fr.channel = channel;
  fr.t_s = t_s;
  fr.omegas = omegas;
  fr.magnitudes.resize(omegas.size());
  for (Eigen::Index i = 0; i < omegas.size(); ++i)
    fr.magnitudes(i) = channel_gain(p, channel, omegas(i), t_s);
  return fr;
}

/// Gain of the continuous-time channel at angular frequency omega (rad/h),
/// straight from the physical realization. Useful as the warping-free
/// reference for the bilinear map.
inline double continuous_channel_gain(const RcParams& p, Channel channel,
                                      double omega) {
  const ContinuousStateSpace ss = build_state_space(p);
  const auto [d1, d2] = continuous_denominator(p);
  const std::complex<double> s(0.0, omega);
  const std::complex<double> den = s * s + d1 * s + d2;
  std::complex<double> num;
  switch (channel) {
    case Channel::kQhvac: num = (s - ss.F(1, 1)) * ss.G(0, 0); break;
    case Channel::kToa: num = ss.F(0, 1) * ss.G(1, 1); break;
    case Channel::kEtasol: num = (s - ss.F(1, 1)) * ss.G(0, 2); break;
  }
  return std::abs(num / den);
}

/// Default Bode grid: 200 log-spaced points from one cycle per ten weeks
/// up to the Nyquist frequency.
inline Eigen::VectorXd default_omega_grid(double t_s, int points = 200) {
  if (!(t_s > 0.0) || points < 2)
    throw std::invalid_argument("default_omega_grid: bad arguments");
  const double lo = std::log(2.0 * M_PI / (10.0 * 7.0 * 24.0));
  const double hi = std::log(M_PI / t_s);
  Eigen::VectorXd grid(points);
  for (int i = 0; i < points; ++i)
    grid(i) = std::exp(lo + (hi - lo) * static_cast<double>(i) /
                                static_cast<double>(points - 1));
  return grid;
}

struct FrError {
  double max_err = 0.0;
  double argmax_omega = 0.0;
  int skipped = 0;  ///< grid points where the reference gain was zero
};

/// max over the grid of |Ghat - G| / |G| for one channel, with the
/// maximizing frequency. Grid points where the reference gain vanishes
/// (the channels have a structural numerator root at the Nyquist point)
/// are skipped rather than divided by.
inline FrError max_relative_fr_error(const PlantParams& theta_true,
                                     const PlantParams& theta_hat,
                                     Channel channel,
                                     const Eigen::VectorXd& omegas,
                                     double t_s) {
  FrError out;
  Eigen::VectorXd ref(omegas.size());
  double ref_peak = 0.0;
  for (Eigen::Index i = 0; i < omegas.size(); ++i) {
    ref(i) = channel_gain(theta_true, channel, omegas(i), t_s);
    ref_peak = std::max(ref_peak, ref(i));
  }
  for (Eigen::Index i = 0; i < omegas.size(); ++i) {
    if (ref(i) <= 1e-12 * ref_peak) {
      ++out.skipped;
      continue;
    }
    const double gh = channel_gain(theta_hat, channel, omegas(i), t_s);
    const double err = std::abs(gh - ref(i)) / ref(i);
    if (err > out.max_err) {
      out.max_err = err;
      out.argmax_omega = omegas(i);
    }
  }
  return out;
}

struct ParamError {
  double theta_true = 0.0;
  double theta_hat = 0.0;
  double percent = 0.0;  ///< (true - hat) / true * 100; negative = overestimate
  bool defined = true;   ///< false when theta_true == 0
};

inline std::array<ParamError, 11> param_error_table(
    const PlantParams& theta_true, const PlantParams& theta_hat) {
  std::array<ParamError, 11> rows;
  for (int i = 0; i < 11; ++i) {
    rows[static_cast<std::size_t>(i)].theta_true = theta_true.theta(i);
    rows[static_cast<std::size_t>(i)].theta_hat = theta_hat.theta(i);
    if (theta_true.theta(i) == 0.0) {
      rows[static_cast<std::size_t>(i)].defined = false;
      rows[static_cast<std::size_t>(i)].percent = 0.0;
    } else {
      rows[static_cast<std::size_t>(i)].percent =
          (theta_true.theta(i) - theta_hat.theta(i)) / theta_true.theta(i) *
          100.0;
    }
  }
  return rows;
}

inline double rms_error(std::span<const double> y,
                        std::span<const double> y_hat) {
  if (y.size() != y_hat.size() || y.empty())
    throw std::invalid_argument("rms_error: length mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double e = y[k] - y_hat[k];
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(y.size()));
}

}  // namespace thermid
