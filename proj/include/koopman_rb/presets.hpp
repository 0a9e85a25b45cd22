// Copyright 2026 The koopman_rb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Named scenarios and their JSON files: the attitude and full-model
// validation runs, the comparison-table run and the quadrotor square flight.
#pragma once

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "koopman_rb/harness.hpp"
#include "koopman_rb/quad_control.hpp"

namespace koopman_rb {

using AnyScenario = std::variant<ScenarioConfig, QuadScenarioConfig>;

struct Preset {
  std::string name;
  AnyScenario config;

  const std::string& description() const {
    return std::visit([](const auto& c) -> const std::string& { return c.description; },
                      config);
  }
};

// Quad JSON ---------------------------------------------------------------------

inline Json to_json(const QuadScenarioConfig& c) {
  using detail::vec_json;
  auto arr = [](const auto& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
  };
  return Json{
      {"name", c.name},
      {"description", c.description},
      {"kind", "quad"},
      {"inertia_diagonal", vec_json(c.inertia_diagonal)},
      {"mass", c.mass},
      {"gravity", c.gravity},
      {"square",
       {{"side", c.square.side},
        {"total_time", c.square.total_time},
        {"hold_fraction", c.square.hold_fraction},
        {"origin", vec_json(c.square.origin)}}},
      {"loop",
       {{"plant_dt", c.loop.plant_dt},
        {"control_dt", c.loop.control_dt},
        {"horizon", c.loop.horizon},
        {"initial_offset", vec_json(c.loop.initial_offset)}}},
      {"weights",
       {{"q_z", arr(c.q_z)},
        {"q_yaw", c.q_yaw},
        {"q_integral_z", arr(c.q_integral_z)},
        {"q_integral_yaw", c.q_integral_yaw},
        {"r_actuated", c.r_actuated},
        {"r_unactuated", c.r_unactuated}}},
      {"integrator_limit_factor", c.integrator_limit_factor},
  };
}

inline QuadScenarioConfig quad_scenario_from_json(const Json& j) {
  using detail::get_as;
  using detail::json_vec;
  detail::reject_unknown(j,
                         {"name", "description", "kind", "inertia_diagonal", "mass",
                          "gravity", "square", "loop", "weights",
                          "integrator_limit_factor"},
                         "");
  QuadScenarioConfig c;
  auto num = [&](const Json& o, const char* k, double& dst, const std::string& where) {
    if (o.contains(k)) dst = get_as<double>(o[k], where + "." + k);
  };
  auto order_vec = [&](const Json& o, const std::string& key) {
    if (!o.is_array() || o.size() != kQuadNz) {
      throw ConfigError(key + ": expected " + std::to_string(kQuadNz) + " numbers");
    }
    Eigen::Matrix<double, kQuadNz, 1> v;
    for (int i = 0; i < kQuadNz; ++i) v(i) = get_as<double>(o[i], key);
    return v;
  };
  if (j.contains("kind") && get_as<std::string>(j["kind"], "kind") != "quad") {
    throw ConfigError("kind must be \"quad\"");
  }
  if (j.contains("name")) c.name = get_as<std::string>(j["name"], "name");
  if (j.contains("description")) {
    c.description = get_as<std::string>(j["description"], "description");
  }
  if (j.contains("inertia_diagonal")) {
    c.inertia_diagonal = json_vec(j["inertia_diagonal"], "inertia_diagonal");
  }
  num(j, "mass", c.mass, "");
  num(j, "gravity", c.gravity, "");
  if (j.contains("square")) {
    const Json& s = j["square"];
    detail::reject_unknown(s, {"side", "total_time", "hold_fraction", "origin"}, "square");
    num(s, "side", c.square.side, "square");
    num(s, "total_time", c.square.total_time, "square");
    num(s, "hold_fraction", c.square.hold_fraction, "square");
    if (s.contains("origin")) c.square.origin = json_vec(s["origin"], "square.origin");
  }
  if (j.contains("loop")) {
    const Json& l = j["loop"];
    detail::reject_unknown(l, {"plant_dt", "control_dt", "horizon", "initial_offset"}, "loop");
    num(l, "plant_dt", c.loop.plant_dt, "loop");
    num(l, "control_dt", c.loop.control_dt, "loop");
    num(l, "horizon", c.loop.horizon, "loop");
    if (l.contains("initial_offset")) {
      c.loop.initial_offset = json_vec(l["initial_offset"], "loop.initial_offset");
    }
  }
  if (j.contains("weights")) {
    const Json& w = j["weights"];
    detail::reject_unknown(w,
                           {"q_z", "q_yaw", "q_integral_z", "q_integral_yaw", "r_actuated",
                            "r_unactuated"},
                           "weights");
    if (w.contains("q_z")) c.q_z = order_vec(w["q_z"], "weights.q_z");
    if (w.contains("q_integral_z")) {
      c.q_integral_z = order_vec(w["q_integral_z"], "weights.q_integral_z");
    }
    num(w, "q_yaw", c.q_yaw, "weights");
    num(w, "q_integral_yaw", c.q_integral_yaw, "weights");
    num(w, "r_actuated", c.r_actuated, "weights");
    num(w, "r_unactuated", c.r_unactuated, "weights");
  }
  num(j, "integrator_limit_factor", c.integrator_limit_factor, "");
  validate(c);
  return c;
}

inline Json to_json(const AnyScenario& s) {
  return std::visit([](const auto& c) { return to_json(c); }, s);
}

/// Dispatches on "kind": "quad" selects the quadrotor schema.
inline AnyScenario any_scenario_from_json(const Json& j) {
  if (j.is_object() && j.contains("kind") && j["kind"] == "quad") {
    return quad_scenario_from_json(j);
  }
  return scenario_from_json(j);
}

// Registry ----------------------------------------------------------------------

namespace detail {

inline std::vector<TruncationConfig> attitude_truncations(int lo, int hi) {
  std::vector<TruncationConfig> t;
  for (int n = lo; n <= hi; ++n) t.push_back({n, 1});
  return t;
}

inline std::vector<TruncationConfig> diagonal_truncations(std::initializer_list<int> ks) {
  std::vector<TruncationConfig> t;
  for (int k : ks) t.push_back({k, k});
  return t;
}

inline ScenarioConfig unforced_attitude(const std::string& name, const std::string& inertia,
                                        double nu0, const std::string& text) {
  ScenarioConfig c;
  c.name = name;
  c.description = text;
  c.kind = ScenarioKind::kAttitude;
  c.inertia = inertia;
  c.inertia_diagonal = *named_inertia(inertia);
  c.nu0 = Vec3::Constant(nu0);
  c.truncations = attitude_truncations(2, 6);
  c.dt = 1e-3;
  c.dt_unit = TimeUnit::kTLim;
  c.horizon = 15.0;
  c.horizon_unit = TimeUnit::kTLim;
  c.record_every = 10;
  return c;
}

inline ScenarioConfig forced_attitude(const std::string& name, double alpha) {
  ScenarioConfig c = unforced_attitude(name, "J0", 1e-2, "");
  c.description = "J0, nu0 = 0.01 rad/s per axis, sinusoidal torque alpha = " +
                  format_double(alpha);
  c.torque.alpha = alpha;
  c.torque.beta = Vec3::Ones();
  c.torque.rho = Vec3::Constant(2.0 * std::numbers::pi);
  c.torque.rho_t = std::numbers::pi / 2.0;
  c.dt = 5e-3;
  c.dt_unit = TimeUnit::kSeconds;
  c.horizon = 10.0;
  c.record_every = 20;
  return c;
}

inline ScenarioConfig forced_full(const std::string& name, const std::string& text,
                                  double alpha, const Vec3& beta, double rho, double rho_t,
                                  double dt) {
  ScenarioConfig c;
  c.name = name;
  c.description = text;
  c.kind = ScenarioKind::kFull;
  c.inertia = "J0";
  c.inertia_diagonal = inertia::J0();
  c.mass = 1.0;
  c.nu0 = Vec3::Constant(1e-2);
  c.torque.alpha = alpha;
  c.torque.beta = beta;
  c.torque.rho = Vec3::Constant(rho);
  c.torque.rho_t = rho_t;
  c.force.constant = Vec3(1.0, 1.0, 0.0);
  c.force.z_per_mass = 9.85;
  c.truncations = diagonal_truncations({2, 4, 6, 8, 10, 12});
  c.dt = dt;
  c.dt_unit = TimeUnit::kSeconds;
  c.horizon = 1.0;
  c.horizon_unit = TimeUnit::kTLim;
  c.record_every = 10;
  return c;
}

inline ScenarioConfig identity_inertia_full(const std::string& name, const std::string& text,
                                            std::vector<TruncationConfig> truncations) {
  ScenarioConfig c = forced_full(name, text, 1e-5, Vec3::Ones(), 0.1, 0.0, 1e-3);
  c.inertia = "JI";
  c.inertia_diagonal = inertia::JI();
  c.nu0 = Vec3::Constant(0.1);
  c.truncations = std::move(truncations);
  return c;
}

}  // namespace detail

/// Square-flight preset whose weights pass the closed-loop gates.
inline QuadScenarioConfig quad_square_preset() {
  QuadScenarioConfig c;
  c.name = "quad-square";
  c.description =
      "J_Q quadrotor, m = 1.2 kg, 2 m square at z = 0 over 70 s, plant 1 ms, controller 10 ms";
  c.q_z << 100.0, 100.0, 10.0, 1.0, 0.1;
  c.q_yaw = 1.0;
  c.q_integral_z << 10.0, 0.01, 0.01, 0.01, 0.01;
  c.q_integral_yaw = 10.0;
  c.r_actuated = 0.1;
  c.r_unactuated = 1e4;
  c.integrator_limit_factor = 10.0;
  return c;
}

inline std::vector<Preset> presets() {
  using namespace detail;
  const double pi = std::numbers::pi;
  const Vec3 beta_mixed(1.0, 0.5, 0.1);
  std::vector<Preset> out;
  auto add = [&](auto cfg) { out.push_back(Preset{cfg.name, cfg}); };
  const char* decades[] = {"0.001", "0.01", "0.1", "1", "10"};
  for (int i = 0; i < 5; ++i) {
    add(unforced_attitude("fig" + std::to_string(i + 1), "J0", std::pow(10.0, i - 3),
                          std::string("Unforced attitude, J0, nu0 = ") + decades[i] +
                              " rad/s per axis"));
  }
  for (int i = 1; i <= 4; ++i) {
    add(unforced_attitude("fig" + std::to_string(i + 5), "J" + std::to_string(i), 1e-3,
                          "Unforced attitude, inertia J" + std::to_string(i) +
                              " of the inertia table, nu0 = 0.001 rad/s per axis"));
  }
  for (int i = 0; i < 5; ++i) {
    add(forced_attitude("fig" + std::to_string(i + 10), std::pow(10.0, i - 6)));
  }
  add(identity_inertia_full("fig16", "Full model, J = I, N_nu = N_z = k, forcing as table2",
                            diagonal_truncations({2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12})));
  add(forced_full("fig17", "Full model, J0, alpha = 1e-5, beta = 1, rho = 0.1, rho_t = 0",
                  1e-5, Vec3::Ones(), 0.1, 0.0, 1e-2));
  add(forced_full("fig18",
                  "Full model, J0, alpha = 1e-4, beta = (1, 0.5, 0.1), rho = 0.2 pi, rho_t = pi/2",
                  1e-4, beta_mixed, 0.2 * pi, pi / 2.0, 1e-2));
  add(forced_full("fig19",
                  "Full model, J0, alpha = 1e-4, beta = (1, 0.5, 0.1), rho = 2 pi, rho_t = pi/2",
                  1e-4, beta_mixed, 2.0 * pi, pi / 2.0, 5e-3));
  add(forced_full("fig20",
                  "Full model, J0, alpha = 1e-3, beta = (1, 0.5, 0.1), rho = 2 pi, rho_t = pi/2",
                  1e-3, beta_mixed, 2.0 * pi, pi / 2.0, 5e-3));
  {
    ScenarioConfig c = forced_full(
        "fig21", "Quadrotor model, J_Q, m = 1.2 kg, thrust m * 9.85, N_nu = 2, N_z = 5",
        2e-6, beta_mixed, 0.2 * pi, pi / 2.0, 1e-2);
    c.inertia = "JQ";
    c.inertia_diagonal = inertia::JQ();
    c.mass = 1.2;
    c.force.constant = Vec3::Zero();
    c.truncations = {{2, 5}};
    add(c);
  }
  add(identity_inertia_full(
      "table2", "Comparison-table run: J = I, N_nu = 1, N_z = 12 (39 states), forcing as fig17",
      {{1, 12}}));
  add(quad_square_preset());
  return out;
}

inline std::optional<Preset> find_preset(const std::string& name) {
  for (Preset& p : presets()) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// Quad output ------------------------------------------------------------------

/// Controller-rate log in the harness CSV schema (truncation label "quad16").
inline std::string quad_log_csv(const ClosedLoopLog& log) {
  std::string out = kCsvHeader;
  auto row = [&](double t, const char* q, double v) {
    out += format_double(t);
    out += ',';
    out += q;
    out += ",quad16,";
    out += format_double(v);
    out += '\n';
  };
  static constexpr const char* kAxes[3] = {"x", "y", "z"};
  for (const ClosedLoopSample& s : log.samples) {
    for (int a = 0; a < 3; ++a) {
      row(s.t, (std::string("p_") + kAxes[a]).c_str(), s.p[a]);
      row(s.t, (std::string("p_ref_") + kAxes[a]).c_str(), s.p_ref[a]);
      row(s.t, (std::string("eta_") + kAxes[a]).c_str(), s.eta[a]);
    }
    row(s.t, "thrust", s.zeta(0));
    for (int a = 0; a < 3; ++a) {
      row(s.t, (std::string("torque_") + kAxes[a]).c_str(), s.zeta(1 + a));
    }
    row(s.t, "residual", s.residual);
    row(s.t, "tracking_error", (s.p - s.p_ref).norm());
  }
  return out;
}

inline Json quad_summary_json(const QuadScenarioConfig& cfg, const QuadRunReport& r) {
  return Json{
      {"scenario", cfg.name},
      {"riccati_relative_residual", r.controller.riccati_residual},
      {"closed_loop_spectral_abscissa", r.controller.closed_loop_abscissa},
      {"gain_norm", r.controller.K.norm()},
      {"integrator_limit", r.controller.integrator_limit},
      {"integrator_clamp_samples", r.clamp_samples},
      {"samples", r.log.samples.size()},
      {"max_tracking_error", r.max_tracking_error},
      {"max_tracking_error_over_side", r.max_tracking_error / r.side},
      {"corner_errors", r.corner_errors},
      {"thrust_min", r.thrust_min},
      {"thrust_max", r.thrust_max},
      {"torque_norm_max", r.torque_norm_max},
      {"residual_fraction_below_20pct", r.residual_fraction_below_20pct},
      {"residual_median", r.residual_median},
      {"residual_max", r.residual_max},
      {"config", to_json(cfg)},
  };
}

inline std::vector<std::filesystem::path> emit_quad_results(const QuadScenarioConfig& cfg,
                                                            const QuadRunReport& r,
                                                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files{dir / (cfg.name + "_log.csv"),
                                           dir / (cfg.name + "_summary.json")};
  write_text(files[0], quad_log_csv(r.log));
  write_text(files[1], quad_summary_json(cfg, r).dump(2) + "\n");
  return files;
}

}  // namespace koopman_rb
