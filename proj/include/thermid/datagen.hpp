#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermid/rc_model.hpp"

namespace thermid {

/// Uniformly sampled input/output record for one experiment.
/// u1 = qhvac (kW), u2 = Toa (degC), u3 = etasol (kW/m^2), y = Tz (degC).
/// w (true internal gain, kW) and setpoint (Tref, degC) are optional and
/// empty when absent.
struct TimeSeriesDataset {
  double t_s = kDefaultSamplingHours;
  std::vector<double> u1;
  std::vector<double> u2;
  std::vector<double> u3;
  std::vector<double> y;
  std::vector<double> w;
  std::vector<double> setpoint;

  std::size_t size() const { return y.size(); }
  bool has_w() const { return !w.empty(); }
  bool has_setpoint() const { return !setpoint.empty(); }
};

inline void validate(const TimeSeriesDataset& d) {
  if (!(d.t_s > 0.0))
    throw std::invalid_argument("TimeSeriesDataset: t_s must be > 0");
  const std::size_t n = d.y.size();
  if (n < 3)
    throw std::invalid_argument("TimeSeriesDataset: need at least 3 samples");
  auto check = [n](const std::vector<double>& v, const char* name,
                   bool optional) {
    if (optional && v.empty()) return;
    if (v.size() != n)
      throw std::invalid_argument(std::string("TimeSeriesDataset: series ") +
                                  name + " has inconsistent length");
  };
  check(d.u1, "u1", false);
  check(d.u2, "u2", false);
  check(d.u3, "u3", false);
  check(d.w, "w", true);
  check(d.setpoint, "setpoint", true);
}

/// PI controller gains and actuator limits for the HVAC loop.
struct PiConfig {
  double kp;     ///< proportional gain (kW/degC)
  double ki;     ///< integral gain (kW/(degC*h))
  double u_min;  ///< lower actuator limit (kW)
  double u_max;  ///< upper actuator limit (kW)
};

/// Cooling-only preset that stabilizes the reference plant with visible
/// transients.
inline constexpr PiConfig kDefaultPi{5.0, 2.0, -50.0, 0.0};

struct PrbsConfig {
  double low = 22.0;
  double high = 27.0;
  int bit_period = 6;  ///< samples per PRBS bit (30 min at 5-min sampling)
};

/// Two-level pseudo-random binary sequence from a 10-stage maximal-length
/// LFSR (x^10 + x^7 + 1), each bit held for bit_period samples.
inline std::vector<double> generate_prbs(double low, double high,
                                         int bit_period, std::size_t n,
                                         std::uint64_t seed) {
  if (!(low < high))
    throw std::invalid_argument("generate_prbs: need low < high");
  if (bit_period < 1 || n < 1)
    throw std::invalid_argument("generate_prbs: bit_period and n must be >= 1");
  std::uint32_t state = static_cast<std::uint32_t>(seed % 1023u) + 1u;
  std::vector<double> out(n);
  std::size_t i = 0;
  while (i < n) {
    const double level = (state & 1u) ? high : low;
    for (int b = 0; b < bit_period && i < n; ++b) out[i++] = level;
    const std::uint32_t fb = ((state >> 0) ^ (state >> 3)) & 1u;  // taps 10, 7
    state = (state >> 1) | (fb << 9);
  }
  return out;
}

/// Exact zero-order-hold discretization of the continuous realization,
/// with the disturbance appended as a fourth input column.
struct ZohModel {
  Eigen::Matrix2d Ad;
  Eigen::Matrix<double, 2, 4> Bd;
};

inline ZohModel discretize_zoh(const ContinuousStateSpace& ss, double t_s) {
  if (!(t_s > 0.0))
    throw std::invalid_argument("discretize_zoh: t_s must be > 0");
  Eigen::Matrix<double, 6, 6> M = Eigen::Matrix<double, 6, 6>::Zero();
  M.topLeftCorner<2, 2>() = ss.F;
  M.block<2, 3>(0, 2) = ss.G;
  M.block<2, 1>(0, 5) = ss.H;
  const Eigen::Matrix<double, 6, 6> E = (M * t_s).exp();
  return {E.topLeftCorner<2, 2>(), E.block<2, 4>(0, 2)};
}

/// How the simulators reconstruct the inputs between samples.
///   kZoh: every input held constant over [k, k+1).
///   kFoh: every input ramps linearly from its sample-k value to its
///         sample-(k+1) value (triangle hold, the convention continuous
///         simulators use when given sampled input records).
/// Both reconstructions are simulated exactly through augmented matrix
/// exponentials.
enum class HoldKind { kZoh, kFoh };

/// Triangle-hold step pieces: a ramped input contributes
/// B_now * u[k] + B_next * u[k+1] to the state update. Column order is
/// [qhvac, Toa, etasol, qint].
struct FohModel {
  Eigen::Matrix2d Ad;
  Eigen::Matrix<double, 2, 4> B_now;
  Eigen::Matrix<double, 2, 4> B_next;
};

inline FohModel discretize_foh(const ContinuousStateSpace& ss, double t_s) {
  if (!(t_s > 0.0))
    throw std::invalid_argument("discretize_foh: t_s must be > 0");
  // Van Loan block exponential: the top row of exp([F B 0; 0 0 I; 0 0 0] h)
  // carries Ad, G1 = int exp(F(h-s)) B ds and G2 = int exp(F(h-s)) B s ds.
  Eigen::Matrix<double, 10, 10> M = Eigen::Matrix<double, 10, 10>::Zero();
  M.topLeftCorner<2, 2>() = ss.F;
  M.block<2, 3>(0, 2) = ss.G;
  M.block<2, 1>(0, 5) = ss.H;
  M.block<4, 4>(2, 6).setIdentity();
  const Eigen::Matrix<double, 10, 10> E = (M * t_s).exp();
  const Eigen::Matrix<double, 2, 4> G1 = E.block<2, 4>(0, 2);
  const Eigen::Matrix<double, 2, 4> G2 = E.block<2, 4>(0, 6);

  FohModel out;
  out.Ad = E.topLeftCorner<2, 2>();
  out.B_now = G1 - G2 / t_s;
  out.B_next = G2 / t_s;
  return out;
}

namespace sim_detail {
// One-step transition with either reconstruction; the triangle hold needs
// this and the next sample of every input.
struct Stepper {
  HoldKind hold;
  ZohModel zoh;
  FohModel foh;

  Stepper(const ContinuousStateSpace& ss, double t_s, HoldKind kind)
      : hold(kind) {
    if (hold == HoldKind::kZoh)
      zoh = discretize_zoh(ss, t_s);
    else
      foh = discretize_foh(ss, t_s);
  }

  Eigen::Vector2d advance(const Eigen::Vector2d& x,
                          const Eigen::Vector4d& in_now,
                          const Eigen::Vector4d& in_next) const {
    if (hold == HoldKind::kZoh) return zoh.Ad * x + zoh.Bd * in_now;
    return foh.Ad * x + foh.B_now * in_now + foh.B_next * in_next;
  }
};

inline Eigen::Vector4d in_at(double u1, std::span<const double> u2,
                             std::span<const double> u3,
                             std::span<const double> w, std::size_t k) {
  return {u1, u2[k], u3[k], w[k]};
}
}  // namespace sim_detail

/// Simulates the plant under given inputs and disturbance; y[k] = J x[k],
/// so y[0] is the initial zone temperature. The default reconstruction
/// holds every input constant over [k, k+1) (exact ZOH); see HoldKind for
/// the mixed alternative. x_final, when given, receives the state at the
/// last sample so runs can be chained.
inline TimeSeriesDataset simulate_open_loop(const ContinuousStateSpace& ss,
                                            std::span<const double> u1,
                                            std::span<const double> u2,
                                            std::span<const double> u3,
                                            std::span<const double> w,
                                            double t_s,
                                            const Eigen::Vector2d& x0,
                                            Eigen::Vector2d* x_final = nullptr,
                                            HoldKind hold = HoldKind::kZoh) {
  const std::size_t n = u1.size();
  if (u2.size() != n || u3.size() != n || w.size() != n)
    throw std::invalid_argument("simulate_open_loop: input length mismatch");
  if (n < 3)
    throw std::invalid_argument("simulate_open_loop: need at least 3 samples");
  const sim_detail::Stepper step(ss, t_s, hold);

  TimeSeriesDataset d;
  d.t_s = t_s;
  d.u1.assign(u1.begin(), u1.end());
  d.u2.assign(u2.begin(), u2.end());
  d.u3.assign(u3.begin(), u3.end());
  d.w.assign(w.begin(), w.end());
  d.y.resize(n);

  Eigen::Vector2d x = x0;
  for (std::size_t k = 0; k < n; ++k) {
    d.y[k] = ss.J * x;
    if (k + 1 < n)
      x = step.advance(x, sim_detail::in_at(u1[k], u2, u3, w, k),
                       sim_detail::in_at(u1[k + 1], u2, u3, w, k + 1));
  }
  if (x_final) *x_final = x;
  return d;
}

/// Closed-loop simulation: qhvac comes from a PI loop tracking the
/// setpoint, with conditional integration as anti-windup (the integral
/// state is frozen on the steps where the actuator saturates).
inline TimeSeriesDataset simulate_closed_loop(const ContinuousStateSpace& ss,
                                              std::span<const double> u2,
                                              std::span<const double> u3,
                                              std::span<const double> w,
                                              std::span<const double> setpoint,
                                              const PiConfig& pi, double t_s,
                                              const Eigen::Vector2d& x0,
                                              HoldKind hold = HoldKind::kZoh) {
  const std::size_t n = u2.size();
  if (u3.size() != n || w.size() != n || setpoint.size() != n)
    throw std::invalid_argument("simulate_closed_loop: input length mismatch");
  if (n < 3)
    throw std::invalid_argument(
        "simulate_closed_loop: need at least 3 samples");
  if (!(pi.u_min <= pi.u_max))
    throw std::invalid_argument("simulate_closed_loop: u_min > u_max");
  const sim_detail::Stepper step(ss, t_s, hold);

  TimeSeriesDataset d;
  d.t_s = t_s;
  d.u1.resize(n);
  d.u2.assign(u2.begin(), u2.end());
  d.u3.assign(u3.begin(), u3.end());
  d.w.assign(w.begin(), w.end());
  d.setpoint.assign(setpoint.begin(), setpoint.end());
  d.y.resize(n);

  Eigen::Vector2d x = x0;
  double integral = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    d.y[k] = ss.J * x;
    const double e = setpoint[k] - d.y[k];
    const double u_raw = pi.kp * e + pi.ki * integral;
    const double u = std::clamp(u_raw, pi.u_min, pi.u_max);
    if (u == u_raw) integral += e * t_s;
    d.u1[k] = u;
    if (k + 1 < n)
      x = step.advance(x, u, sim_detail::env_at(u2, u3, w, k),
                       sim_detail::env_at(u2, u3, w, k + 1));
  }
  return d;
}

namespace weather_detail {
// Synthetic Gainesville-summer-like climate. Amplitudes are deliberately
// modest so that seed-to-seed daily statistics stay close.
inline constexpr double kToaMean = 29.0;        // degC
inline constexpr double kToaAmplitude = 4.5;    // degC
inline constexpr double kToaPeakHour = 15.0;
inline constexpr double kToaNoiseStd = 0.8;     // degC
inline constexpr double kToaNoiseTau = 3.0;     // hours
inline constexpr double kSolPeak = 0.85;        // kW/m^2
inline constexpr double kSolSunrise = 7.0;
inline constexpr double kSolSunset = 19.0;
inline constexpr double kCloudsPerDay = 2.0;
}  // namespace weather_detail

/// Synthetic week(s) of ambient temperature and solar irradiance:
/// diurnal sinusoid + AR(1) noise for Toa, half-rectified diurnal arc
/// with random cloud dropouts for etasol (always >= 0).
inline std::pair<std::vector<double>, std::vector<double>> synth_weather(
    std::size_t n, double t_s, std::uint64_t seed) {
  using namespace weather_detail;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<double> toa(n), sol(n);
  const double a = std::exp(-t_s / kToaNoiseTau);
  const double innovation = kToaNoiseStd * std::sqrt(1.0 - a * a);
  double ar = 0.0;

  double cloud_left = 0.0;   // remaining hours of the active cloud event
  double cloud_gain = 1.0;
  const double cloud_start_p = kCloudsPerDay * t_s / 24.0;

  for (std::size_t k = 0; k < n; ++k) {
    const double h = std::fmod(static_cast<double>(k) * t_s, 24.0);
    ar = a * ar + innovation * gauss(rng);
    toa[k] = kToaMean +
             kToaAmplitude *
                 std::cos(2.0 * M_PI * (h - kToaPeakHour) / 24.0) +
             ar;

    double base = 0.0;
    if (h > kSolSunrise && h < kSolSunset)
      base = kSolPeak *
             std::sin(M_PI * (h - kSolSunrise) / (kSolSunset - kSolSunrise));
    if (cloud_left <= 0.0 && unif(rng) < cloud_start_p) {
      cloud_left = 0.5 + 1.5 * unif(rng);   // 0.5 - 2.0 h
      cloud_gain = 0.25 + 0.5 * unif(rng);  // keep 25 - 75 %
    }
    double gain = 1.0;
    if (cloud_left > 0.0) {
      gain = cloud_gain;
      cloud_left -= t_s;
    }
    sol[k] = std::max(0.0, base * gain);
  }
  return {std::move(toa), std::move(sol)};
}

/// Shape of the synthetic internal-gain (occupancy) signal.
struct DisturbanceProfile {
  enum class Kind { PiecewiseConstant, Smooth };
  Kind kind = Kind::PiecewiseConstant;
  double peak_kw = 4.0;          ///< bound on |w|
  double smoothing_hours = 0.6;  ///< transition time scale for Smooth
};

namespace disturbance_detail {
struct Step {
  double hour;   // absolute time of the level change, in hours
  double level;  // level after the change, as a fraction of peak_kw
};

// Occupancy-style schedule: arrival, optional midday dip and recovery,
// departure. 2 or 4 level changes per day.
inline std::vector<Step> daily_schedule(std::size_t days,
                                        std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Step> steps;
  for (std::size_t d = 0; d < days; ++d) {
    const double base = 24.0 * static_cast<double>(d);
    const double arrive = base + 7.5 + 1.5 * unif(rng);
    const double depart = base + 17.0 + 2.0 * unif(rng);
    const double level = 0.5 + 0.5 * unif(rng);
    steps.push_back({arrive, level});
    if (unif(rng) < 0.5) {
      const double dip_start = base + 11.5 + 1.0 * unif(rng);
      const double dip_len = 0.5 + 1.0 * unif(rng);
      const double dip_level = level * (0.3 + 0.4 * unif(rng));
      steps.push_back({dip_start, dip_level});
      steps.push_back({dip_start + dip_len, level});
    }
    steps.push_back({depart, 0.0});
  }
  return steps;
}
}  // namespace disturbance_detail

/// Synthetic internal heat gain. PiecewiseConstant holds exact levels
/// between a handful of schedule transitions per day; Smooth runs the same
/// schedule through logistic transitions so samples vary strictly while a
/// transition is underway. Both kinds satisfy |w| <= peak_kw.
inline std::vector<double> make_disturbance(const DisturbanceProfile& profile,
                                            std::size_t n, double t_s,
                                            std::uint64_t seed) {
  if (!(profile.peak_kw >= 0.0))
    throw std::invalid_argument("make_disturbance: peak_kw must be >= 0");
  std::mt19937_64 rng(seed);
  const std::size_t days =
      static_cast<std::size_t>(std::ceil(static_cast<double>(n) * t_s / 24.0));
  const auto steps = disturbance_detail::daily_schedule(std::max<std::size_t>(days, 1), rng);

  std::vector<double> w(n);
  if (profile.kind == DisturbanceProfile::Kind::PiecewiseConstant) {
    // quantize step times to the sample grid; levels exactly constant between
    std::size_t s = 0;
    double level = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double h = static_cast<double>(k) * t_s;
      while (s < steps.size() && steps[s].hour <= h) level = steps[s++].level;
      w[k] = profile.peak_kw * level;
    }
  } else {
    // logistic smoothing of the same schedule; far tails are snapped to
    // exactly zero so unoccupied stretches stay flat
    const double tau = std::max(profile.smoothing_hours / 3.0, 1e-3);
    for (std::size_t k = 0; k < n; ++k) {
      const double h = static_cast<double>(k) * t_s;
      double v = 0.0;
      double prev = 0.0;
      for (const auto& st : steps) {
        const double delta = st.level - prev;
        v += delta / (1.0 + std::exp(-(h - st.hour) / tau));
        prev = st.level;
      }
      if (std::abs(v) < 1e-12) v = 0.0;
      w[k] = profile.peak_kw * std::clamp(v, -1.0, 1.0);
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// CSV interchange
// ---------------------------------------------------------------------------

namespace csv_detail {
inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_cell(const std::string& cell, std::size_t row1,
                         std::size_t col1, const std::string& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
    if (pos != cell.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(path + ": non-numeric cell at row " +
                             std::to_string(row1) + ", column " +
                             std::to_string(col1) + ": '" + cell + "'");
  }
}
}  // namespace csv_detail

/// Writes the dataset in the fixed schema
/// k,qhvac_kW,Toa_C,etasol_kWm2,Tz_C[,qint_kW][,Tref_C] with a 1-based
/// sample index. The file is written to a temporary name and renamed, so
/// readers never observe a partial file. Values round-trip exactly.
inline void write_csv(const TimeSeriesDataset& d,
                      const std::filesystem::path& path) {
  validate(d);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out)
      throw std::runtime_error("write_csv: cannot open " + tmp.string());
    out << "k,qhvac_kW,Toa_C,etasol_kWm2,Tz_C";
    if (d.has_w()) out << ",qint_kW";
    if (d.has_setpoint()) out << ",Tref_C";
    out << "\n";
    char buf[32];
    auto put = [&](double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    };
    for (std::size_t k = 0; k < d.size(); ++k) {
      out << (k + 1);
      put(d.u1[k]);
      put(d.u2[k]);
      put(d.u3[k]);
      put(d.y[k]);
      if (d.has_w()) put(d.w[k]);
      if (d.has_setpoint()) put(d.setpoint[k]);
      out << "\n";
    }
    if (!out) throw std::runtime_error("write_csv: write failed on " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Reads the CSV schema written by write_csv. Columns are matched by
/// header name; unknown columns are skipped with a warning on stderr.
/// Missing required columns, ragged rows and non-numeric cells raise
/// errors naming the offending location.
inline TimeSeriesDataset load_csv(const std::filesystem::path& path,
                                  double t_s = kDefaultSamplingHours) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_csv: empty file " + path.string());
  const auto header = csv_detail::split(line);

  const std::vector<std::string> required = {"k", "qhvac_kW", "Toa_C",
                                             "etasol_kWm2", "Tz_C"};
  const std::vector<std::string> optional = {"qint_kW", "Tref_C"};
  auto find_col = [&](const std::string& name) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  };
  for (const auto& name : required)
    if (find_col(name) < 0)
      throw std::runtime_error("load_csv: " + path.string() +
                               " is missing required column '" + name + "'");
  for (std::size_t i = 0; i < header.size(); ++i) {
    bool known = false;
    for (const auto& name : required) known = known || header[i] == name;
    for (const auto& name : optional) known = known || header[i] == name;
    if (!known)
      std::cerr << "load_csv: " << path.string() << ": ignoring unknown column '"
                << header[i] << "'\n";
  }

  const auto c_u1 = find_col("qhvac_kW"), c_u2 = find_col("Toa_C"),
             c_u3 = find_col("etasol_kWm2"), c_y = find_col("Tz_C"),
             c_w = find_col("qint_kW"), c_sp = find_col("Tref_C");

  TimeSeriesDataset d;
  d.t_s = t_s;
  std::size_t row1 = 1;
  while (std::getline(in, line)) {
    ++row1;
    if (line.empty()) continue;
    const auto cells = csv_detail::split(line);
    if (cells.size() != header.size())
      throw std::runtime_error("load_csv: " + path.string() + ": row " +
                               std::to_string(row1) + " has " +
                               std::to_string(cells.size()) +
                               " cells, header has " +
                               std::to_string(header.size()));
    auto cell = [&](std::ptrdiff_t c) {
      return csv_detail::parse_cell(cells[static_cast<std::size_t>(c)], row1,
                                    static_cast<std::size_t>(c) + 1,
                                    path.string());
    };
    d.u1.push_back(cell(c_u1));
    d.u2.push_back(cell(c_u2));
    d.u3.push_back(cell(c_u3));
    d.y.push_back(cell(c_y));
    if (c_w >= 0) d.w.push_back(cell(c_w));
    if (c_sp >= 0) d.setpoint.push_back(cell(c_sp));
  }
  validate(d);
  return d;
}

}  // namespace thermid
