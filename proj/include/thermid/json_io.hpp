#pragma once

// JSON bindings for the interchange types. Kept in one header so that the
// numeric headers stay independent of the JSON library.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "thermid/analysis.hpp"
#include "thermid/constraints.hpp"
#include "thermid/datagen.hpp"
#include "thermid/regression.hpp"
#include "thermid/rc_model.hpp"
#include "thermid/scenario.hpp"
#include "thermid/solver.hpp"

namespace thermid {

using nlohmann::json;

inline void to_json(json& j, const RcParams& p) {
  j = json{{"Cz", p.Cz}, {"Cw", p.Cw}, {"Rz", p.Rz}, {"Rw", p.Rw}, {"Ae", p.Ae}};
}

inline void from_json(const json& j, RcParams& p) {
  j.at("Cz").get_to(p.Cz);
  j.at("Cw").get_to(p.Cw);
  j.at("Rz").get_to(p.Rz);
  j.at("Rw").get_to(p.Rw);
  j.at("Ae").get_to(p.Ae);
}

inline void to_json(json& j, const PiConfig& p) {
  j = json{{"kp", p.kp}, {"ki", p.ki}, {"u_min", p.u_min}, {"u_max", p.u_max}};
}

inline void from_json(const json& j, PiConfig& p) {
  j.at("kp").get_to(p.kp);
  j.at("ki").get_to(p.ki);
  j.at("u_min").get_to(p.u_min);
  j.at("u_max").get_to(p.u_max);
}

inline void to_json(json& j, const PrbsConfig& p) {
  j = json{{"low", p.low}, {"high", p.high}, {"bit_period", p.bit_period}};
}

inline void from_json(const json& j, PrbsConfig& p) {
  j.at("low").get_to(p.low);
  j.at("high").get_to(p.high);
  j.at("bit_period").get_to(p.bit_period);
}

inline void to_json(json& j, const DisturbanceProfile& p) {
  j = json{{"kind", p.kind == DisturbanceProfile::Kind::PiecewiseConstant
                        ? "piecewise-constant"
                        : "smooth"},
           {"peak_kw", p.peak_kw},
           {"smoothing_hours", p.smoothing_hours}};
}

inline void from_json(const json& j, DisturbanceProfile& p) {
  const std::string kind = j.value("kind", "piecewise-constant");
  if (kind == "piecewise-constant")
    p.kind = DisturbanceProfile::Kind::PiecewiseConstant;
  else if (kind == "smooth")
    p.kind = DisturbanceProfile::Kind::Smooth;
  else
    throw std::invalid_argument("DisturbanceProfile: unknown kind '" + kind +
                                "'");
  p.peak_kw = j.value("peak_kw", p.peak_kw);
  p.smoothing_hours = j.value("smoothing_hours", p.smoothing_hours);
}

inline void to_json(json& j, const Seeds& s) {
  j = json{{"weather_train", s.weather_train},
           {"weather_val", s.weather_val},
           {"excitation_train", s.excitation_train},
           {"excitation_val", s.excitation_val},
           {"disturbance", s.disturbance}};
}

inline void from_json(const json& j, Seeds& s) {
  s.weather_train = j.value("weather_train", s.weather_train);
  s.weather_val = j.value("weather_val", s.weather_val);
  s.excitation_train = j.value("excitation_train", s.excitation_train);
  s.excitation_val = j.value("excitation_val", s.excitation_val);
  s.disturbance = j.value("disturbance", s.disturbance);
}

inline void to_json(json& j, const ScenarioConfig& c) {
  j = json{{"scenario", to_string(c.kind)},
           {"rc_params", c.rc},
           {"t_s_hours", c.t_s},
           {"horizon_steps", c.horizon},
           {"seeds", c.seeds},
           {"pi", c.pi},
           {"prbs", c.prbs},
           {"ol_hvac_low", c.ol_hvac_low},
           {"ol_hvac_high", c.ol_hvac_high},
           {"disturbance", c.disturbance},
           {"output_dir", c.output_dir}};
}

inline void from_json(const json& j, ScenarioConfig& c) {
  c.kind = parse_scenario(j.at("scenario").get<std::string>());
  if (j.contains("rc_params")) {
    j.at("rc_params").get_to(c.rc);
  } else if (j.contains("rc_preset")) {
    const std::string preset = j.at("rc_preset").get<std::string>();
    if (preset != "reference")
      throw std::invalid_argument("unknown rc_preset '" + preset + "'");
    c.rc = kReferenceParams;
  }
  c.t_s = j.value("t_s_hours", c.t_s);
  c.horizon = j.value("horizon_steps", c.horizon);
  if (j.contains("seeds")) j.at("seeds").get_to(c.seeds);
  if (j.contains("pi")) j.at("pi").get_to(c.pi);
  if (j.contains("prbs")) j.at("prbs").get_to(c.prbs);
  c.ol_hvac_low = j.value("ol_hvac_low", c.ol_hvac_low);
  c.ol_hvac_high = j.value("ol_hvac_high", c.ol_hvac_high);
  if (j.contains("disturbance")) j.at("disturbance").get_to(c.disturbance);
  c.output_dir = j.value("output_dir", c.output_dir);
}

inline void to_json(json& j, const PlantParams& p) {
  j = std::vector<double>(p.theta.data(), p.theta.data() + 11);
}

inline void from_json(const json& j, PlantParams& p) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 11)
    throw std::invalid_argument("PlantParams: expected 11 coefficients");
  for (int i = 0; i < 11; ++i) p.theta(i) = v[static_cast<std::size_t>(i)];
}

inline void to_json(json& j, const ThetaFull& t) {
  j = json{{"theta_p", t.theta_p},
           {"w_bar", std::vector<double>(t.w_bar.data(),
                                         t.w_bar.data() + t.w_bar.size())}};
}

inline void from_json(const json& j, ThetaFull& t) {
  j.at("theta_p").get_to(t.theta_p);
  const auto w = j.at("w_bar").get<std::vector<double>>();
  t.w_bar = Eigen::Map<const Eigen::VectorXd>(w.data(),
                                              static_cast<Eigen::Index>(w.size()));
}

inline void to_json(json& j, const KktInfo& k) {
  j = json{{"primal_inf", k.primal_inf},
           {"stationarity_inf", k.stationarity_inf},
           {"duality_gap_estimate", k.duality_gap_estimate}};
}

inline void to_json(json& j, const SolverResult& r) {
  j = json{{"theta_p", r.theta.theta_p},
           {"w_bar", std::vector<double>(r.theta.w_bar.data(),
                                         r.theta.w_bar.data() +
                                             r.theta.w_bar.size())},
           {"objective", r.objective},
           {"residual_norm", r.residual_norm},
           {"solution_norm", r.solution_norm},
           {"iterations", r.iterations},
           {"status", to_string(r.status)},
           {"kkt", r.kkt}};
}

inline void to_json(json& j, const Violation& v) {
  j = json{{"row", v.row}, {"block", v.block}, {"slack", v.slack}};
}

inline void to_json(json& j, const SparsityReport& r) {
  j = json{{"epsilon_bar", r.epsilon_bar},
           {"w_peak", r.w_peak},
           {"change_frequency", r.change_freq},
           {"fraction_outside", r.fraction_outside},
           {"two_cf_bound", r.two_cf_bound},
           {"count_outside", r.count_outside},
           {"count_allowed", r.count_allowed},
           {"hypothesis_infrequent", r.hypothesis_infrequent},
           {"holds", r.holds},
           {"holds_fraction_form", r.holds_fraction_form}};
}

inline void to_json(json& j, const FrError& e) {
  j = json{{"max_err", e.max_err},
           {"argmax_omega_rad_per_h", e.argmax_omega},
           {"skipped", e.skipped}};
}

inline void to_json(json& j, const ParamError& e) {
  j = json{{"theta_true", e.theta_true},
           {"theta_hat", e.theta_hat},
           {"percent", e.percent},
           {"defined", e.defined}};
}

inline void to_json(json& j, const ValidationMetrics& m) {
  j = json{{"rms_free_run_C", m.rms_free_run},
           {"rms_one_step_C", m.rms_one_step},
           {"wbar_hat_l1", m.wbar_hat_l1},
           {"wbar_hat_max", m.wbar_hat_max},
           {"wbar_hat_zero_fraction", m.wbar_hat_zero_fraction},
           {"has_truth", m.has_truth}};
  if (m.has_truth) {
    j["param_errors"] = m.param_errors;
    j["fr_error"] = json{{"qhvac", m.fr_qhvac},
                         {"Toa", m.fr_toa},
                         {"etasol", m.fr_etasol}};
    j["prop1"] = m.prop1;
    j["wbar_rms_err"] = m.wbar_rms_err;
  }
}

inline json violations_to_json(const std::vector<Violation>& v) {
  json j = json::array();
  for (const auto& x : v) j.push_back(x);
  return j;
}

/// Atomic JSON file write (temp file + rename).
inline void write_json(const json& j, const std::filesystem::path& path,
                       int indent = 2) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out)
      throw std::runtime_error("write_json: cannot open " + tmp.string());
    out << j.dump(indent) << "\n";
    if (!out)
      throw std::runtime_error("write_json: write failed on " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_json: cannot open " + path.string());
  json j;
  in >> j;
  return j;
}

}  // namespace thermid
