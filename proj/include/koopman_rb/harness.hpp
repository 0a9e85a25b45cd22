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

// Validation harness: declarative scenarios, paired nonlinear / lifted runs,
// normalized error series and CSV + JSON result emission.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "koopman_rb/analysis.hpp"
#include "koopman_rb/lifted_model.hpp"

namespace koopman_rb {

using Json = nlohmann::ordered_json;

/// t_lim multiple beyond which higher orders start to hurt.
inline constexpr double kSwitchTimeFactor = 9.0;
/// t_lim multiple inside which the truncated model is trusted.
inline constexpr double kValidityTimeFactor = 5.0;
/// Error ratio (1 = 100 %) that marks divergence onset.
inline constexpr double kDivergenceThreshold = 1.0;

// ---------------------------------------------------------------------------
// Scenario description

/// M(t) = alpha [b1 sin(r1 t), b2 sin(r2 (t - rt)), b3 sin(r3 t)].
struct TorqueSpec {
  double alpha = 0.0;
  Vec3 beta = Vec3::Ones();
  Vec3 rho = Vec3::Constant(2.0 * std::numbers::pi);
  double rho_t = 0.0;

  Vec3 operator()(double t) const {
    return alpha * Vec3(beta.x() * std::sin(rho.x() * t),
                        beta.y() * std::sin(rho.y() * (t - rho_t)),
                        beta.z() * std::sin(rho.z() * t));
  }
  bool active() const { return alpha != 0.0 && beta.squaredNorm() > 0.0; }
};

/// Body-frame force F = constant + mass * z_per_mass * e3.
struct ForceSpec {
  Vec3 constant = Vec3::Zero();
  double z_per_mass = 0.0;

  Vec3 value(double mass) const { return constant + mass * z_per_mass * Vec3::UnitZ(); }
};

enum class ScenarioKind { kAttitude, kFull };
enum class TimeUnit { kSeconds, kTLim };

struct ScenarioConfig {
  std::string name = "custom";
  std::string description;
  ScenarioKind kind = ScenarioKind::kAttitude;
  /// J0..J4, JQ, JI or "custom" (then inertia_diagonal is used).
  std::string inertia = "J0";
  Vec3 inertia_diagonal = inertia::J0();
  double mass = 1.0;
  double gravity = kStandardGravity;
  Vec3 nu0 = Vec3::Constant(1e-3);
  Vec3 eta0 = Vec3::Zero();
  Vec3 p0 = Vec3::Zero();
  Vec3 v0 = Vec3::Zero();
  TorqueSpec torque;
  ForceSpec force;
  std::vector<TruncationConfig> truncations{{2, 1}};
  double dt = 1e-3;
  TimeUnit dt_unit = TimeUnit::kTLim;
  double horizon = 10.0;
  TimeUnit horizon_unit = TimeUnit::kTLim;
  std::size_t record_every = 1;
  BSource b_source = BSource::kLifted;
  bool jordan = false;

  BodyParams params() const {
    BodyParams p;
    p.inertia_diagonal = inertia_diagonal;
    p.mass = mass;
    p.gravity = gravity;
    return p;
  }
  RigidBodyState initial_state() const {
    RigidBodyState s;
    s.p = p0;
    s.v = v0;
    s.R = rotation_from_euler(eta0);
    s.nu = nu0;
    return s;
  }
  InputSignal input() const {
    const TorqueSpec m = torque;
    const Vec3 f = force.value(mass);
    return [m, f](double t) { return BodyInput{f, m(t)}; };
  }
};

inline std::optional<Vec3> named_inertia(const std::string& name) {
  if (name == "J0") return inertia::J0();
  if (name == "J1") return inertia::J1();
  if (name == "J2") return inertia::J2();
  if (name == "J3") return inertia::J3();
  if (name == "J4") return inertia::J4();
  if (name == "JQ") return inertia::JQ();
  if (name == "JI") return inertia::JI();
  return std::nullopt;
}

/// t_lim of the scenario's initial condition, or nullopt at rest.
inline std::optional<double> scenario_t_lim(const ScenarioConfig& c) {
  const BodyParams p = c.params();
  const Vec3 g = p.inertia_diagonal.cwiseProduct(c.nu0);
  if (g.norm() == 0.0) return std::nullopt;
  return t_lim(p, g);
}

inline double resolve_time(double value, TimeUnit unit, const std::optional<double>& tl) {
  if (unit == TimeUnit::kSeconds) return value;
  if (!tl) throw ConfigError("time given in t_lim units but t_lim is infinite (nu0 = 0)");
  return value * *tl;
}

inline void validate(const ScenarioConfig& c) {
  if (c.name.empty()) throw ConfigError("scenario name must not be empty");
  if (c.inertia != "custom") {
    const auto j = named_inertia(c.inertia);
    if (!j) throw ConfigError("unknown inertia '" + c.inertia + "'");
    if (*j != c.inertia_diagonal) {
      throw ConfigError("inertia_diagonal does not match named inertia " + c.inertia);
    }
  }
  try {
    c.params().validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (!c.nu0.allFinite() || !c.eta0.allFinite() || !c.p0.allFinite() || !c.v0.allFinite()) {
    throw ConfigError("initial conditions must be finite");
  }
  if (c.truncations.empty()) throw ConfigError("truncation list must not be empty");
  for (const TruncationConfig& t : c.truncations) {
    try {
      t.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("truncation: ") + e.what());
    }
  }
  if (!(c.dt > 0.0) || !(c.horizon > 0.0)) throw ConfigError("dt and horizon must be > 0");
  if (c.record_every < 1) throw ConfigError("record_every must be >= 1");
  const auto tl = scenario_t_lim(c);
  if (resolve_time(c.horizon, c.horizon_unit, tl) < resolve_time(c.dt, c.dt_unit, tl)) {
    throw ConfigError("horizon shorter than one step");
  }
}

// JSON -----------------------------------------------------------------------

namespace detail {

inline Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Vec3 json_vec(const Json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(key + ": expected [x, y, z]");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ConfigError(key + ": expected numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

inline const char* unit_name(TimeUnit u) { return u == TimeUnit::kSeconds ? "s" : "t_lim"; }

inline TimeUnit parse_unit(const Json& j, const std::string& key) {
  const std::string s = j.get<std::string>();
  if (s == "s") return TimeUnit::kSeconds;
  if (s == "t_lim") return TimeUnit::kTLim;
  throw ConfigError(key + ": unit must be \"s\" or \"t_lim\"");
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> keys,
                           const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : j.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* s) { return k == s; }) ==
        keys.end()) {
      throw ConfigError("unknown key '" + (where.empty() ? k : where + "." + k) + "'");
    }
  }
}

template <class T>
T get_as(const Json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(key + ": wrong type");
  }
}

}  // namespace detail

inline Json to_json(const ScenarioConfig& c) {
  using detail::vec_json;
  Json trunc = Json::array();
  for (const TruncationConfig& t : c.truncations) trunc.push_back({t.n_nu, t.n_z});
  return Json{
      {"name", c.name},
      {"description", c.description},
      {"kind", c.kind == ScenarioKind::kAttitude ? "attitude" : "full"},
      {"inertia", c.inertia},
      {"inertia_diagonal", vec_json(c.inertia_diagonal)},
      {"mass", c.mass},
      {"gravity", c.gravity},
      {"nu0", vec_json(c.nu0)},
      {"eta0", vec_json(c.eta0)},
      {"p0", vec_json(c.p0)},
      {"v0", vec_json(c.v0)},
      {"torque",
       {{"alpha", c.torque.alpha},
        {"beta", vec_json(c.torque.beta)},
        {"rho", vec_json(c.torque.rho)},
        {"rho_t", c.torque.rho_t}}},
      {"force", {{"constant", vec_json(c.force.constant)}, {"z_per_mass", c.force.z_per_mass}}},
      {"truncations", trunc},
      {"dt", {{"value", c.dt}, {"unit", detail::unit_name(c.dt_unit)}}},
      {"horizon", {{"value", c.horizon}, {"unit", detail::unit_name(c.horizon_unit)}}},
      {"record_every", c.record_every},
      {"b_source", c.b_source == BSource::kLifted ? "lifted" : "nonlinear"},
      {"jordan", c.jordan},
  };
}

/// Parses a scenario. Missing keys keep their defaults (a named inertia also
/// sets the diagonal); unknown keys are rejected.
inline ScenarioConfig scenario_from_json(const Json& j) {
  using detail::get_as;
  using detail::json_vec;
  detail::reject_unknown(j,
                         {"name", "description", "kind", "inertia", "inertia_diagonal",
                          "mass", "gravity", "nu0", "eta0", "p0", "v0", "torque", "force",
                          "truncations", "dt", "horizon", "record_every", "b_source",
                          "jordan"},
                         "");
  ScenarioConfig c;
  if (j.contains("name")) c.name = get_as<std::string>(j["name"], "name");
  if (j.contains("description")) {
    c.description = get_as<std::string>(j["description"], "description");
  }
  if (j.contains("kind")) {
    const auto k = get_as<std::string>(j["kind"], "kind");
    if (k == "attitude") c.kind = ScenarioKind::kAttitude;
    else if (k == "full") c.kind = ScenarioKind::kFull;
    else throw ConfigError("kind must be \"attitude\" or \"full\"");
  }
  if (j.contains("inertia")) {
    c.inertia = get_as<std::string>(j["inertia"], "inertia");
    if (auto n = named_inertia(c.inertia)) c.inertia_diagonal = *n;
    else if (c.inertia != "custom") throw ConfigError("unknown inertia '" + c.inertia + "'");
  }
  if (j.contains("inertia_diagonal")) {
    c.inertia_diagonal = json_vec(j["inertia_diagonal"], "inertia_diagonal");
  }
  if (j.contains("mass")) c.mass = get_as<double>(j["mass"], "mass");
  if (j.contains("gravity")) c.gravity = get_as<double>(j["gravity"], "gravity");
  if (j.contains("nu0")) c.nu0 = json_vec(j["nu0"], "nu0");
  if (j.contains("eta0")) c.eta0 = json_vec(j["eta0"], "eta0");
  if (j.contains("p0")) c.p0 = json_vec(j["p0"], "p0");
  if (j.contains("v0")) c.v0 = json_vec(j["v0"], "v0");
  if (j.contains("torque")) {
    const Json& t = j["torque"];
    detail::reject_unknown(t, {"alpha", "beta", "rho", "rho_t"}, "torque");
    if (t.contains("alpha")) c.torque.alpha = get_as<double>(t["alpha"], "torque.alpha");
    if (t.contains("beta")) c.torque.beta = json_vec(t["beta"], "torque.beta");
    if (t.contains("rho")) c.torque.rho = json_vec(t["rho"], "torque.rho");
    if (t.contains("rho_t")) c.torque.rho_t = get_as<double>(t["rho_t"], "torque.rho_t");
  }
  if (j.contains("force")) {
    const Json& f = j["force"];
    detail::reject_unknown(f, {"constant", "z_per_mass"}, "force");
    if (f.contains("constant")) c.force.constant = json_vec(f["constant"], "force.constant");
    if (f.contains("z_per_mass")) {
      c.force.z_per_mass = get_as<double>(f["z_per_mass"], "force.z_per_mass");
    }
  }
  if (j.contains("truncations")) {
    const Json& t = j["truncations"];
    if (!t.is_array()) throw ConfigError("truncations: expected [[n_nu, n_z], ...]");
    c.truncations.clear();
    for (const Json& e : t) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer()) {
        throw ConfigError("truncations: expected [[n_nu, n_z], ...]");
      }
      c.truncations.push_back({e[0].get<int>(), e[1].get<int>()});
    }
  }
  for (const char* key : {"dt", "horizon"}) {
    if (!j.contains(key)) continue;
    const Json& t = j[key];
    detail::reject_unknown(t, {"value", "unit"}, key);
    double& value = std::string(key) == "dt" ? c.dt : c.horizon;
    TimeUnit& unit = std::string(key) == "dt" ? c.dt_unit : c.horizon_unit;
    if (t.contains("value")) value = get_as<double>(t["value"], std::string(key) + ".value");
    if (t.contains("unit")) unit = detail::parse_unit(t["unit"], std::string(key) + ".unit");
  }
  if (j.contains("record_every")) {
    const auto r = get_as<long long>(j["record_every"], "record_every");
    if (r < 1) throw ConfigError("record_every must be >= 1");
    c.record_every = static_cast<std::size_t>(r);
  }
  if (j.contains("b_source")) {
    const auto b = get_as<std::string>(j["b_source"], "b_source");
    if (b == "lifted") c.b_source = BSource::kLifted;
    else if (b == "nonlinear") c.b_source = BSource::kNonlinear;
    else throw ConfigError("b_source must be \"lifted\" or \"nonlinear\"");
  }
  if (j.contains("jordan")) c.jordan = get_as<bool>(j["jordan"], "jordan");
  validate(c);
  return c;
}

/// Parses `value` as JSON, falling back to a plain string.
inline Json parse_override_value(const std::string& value) {
  try {
    return Json::parse(value);
  } catch (const nlohmann::json::parse_error&) {
    return Json(value);
  }
}

/// Applies "a.b.c=value" to an object. The path must already exist.
inline void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  const std::string path = assignment.substr(0, eq);
  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (!node->is_object() || !node->contains(key)) {
      throw ConfigError("unknown override key '" + path + "'");
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = parse_override_value(assignment.substr(eq + 1));
}

// ---------------------------------------------------------------------------
// Error metrics

struct ErrorSeries {
  std::vector<double> t;
  /// Error ratios (1 = 100 %) per quantity name.
  std::map<std::string, std::vector<double>> values;
  std::map<std::string, double> normalizers;
  std::map<std::string, double> maxima;
  /// Euclidean norm of the per-quantity maxima of p, v, eta (full runs).
  std::optional<double> total;
};

/// Pointwise ||a_i - b_i|| / normalizer.
inline std::vector<double> error_metric(std::span<const Vec3> nonlinear,
                                        std::span<const Vec3> lifted, double normalizer) {
  if (nonlinear.size() != lifted.size()) throw DomainError("series lengths differ");
  if (!(normalizer > 0.0) || !std::isfinite(normalizer)) {
    throw ZeroNormalizer("error normalizer must be positive and finite");
  }
  std::vector<double> out(nonlinear.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (nonlinear[i] - lifted[i]).norm() / normalizer;
  }
  return out;
}

/// ||x(t0)|| when nonzero, otherwise max_t ||x(t)||.
inline double initial_or_max_norm(std::span<const Vec3> series) {
  if (series.empty()) throw ZeroNormalizer("empty series");
  double n = series.front().norm();
  if (n > 0.0) return n;
  for (const Vec3& v : series) n = std::max(n, v.norm());
  if (n == 0.0) throw ZeroNormalizer("initial value and trajectory maximum vanish");
  return n;
}

inline double max_norm(std::span<const Vec3> series) {
  double n = 0.0;
  for (const Vec3& v : series) n = std::max(n, v.norm());
  if (n == 0.0) throw ZeroNormalizer("trajectory maximum vanishes");
  return n;
}

/// Euler-angle difference with each component wrapped to (-pi, pi].
inline Vec3 angle_difference(const Vec3& a, const Vec3& b) {
  Vec3 d = a - b;
  for (int i = 0; i < 3; ++i) d[i] = std::remainder(d[i], 2.0 * std::numbers::pi);
  return d;
}

inline double norm_of_maxima(double p, double v, double eta) {
  return std::sqrt(p * p + v * v + eta * eta);
}

// ---------------------------------------------------------------------------
// Scenario runs

struct SeriesResult {
  TruncationConfig truncation;
  ErrorSeries error;
  /// First time an error ratio exceeds kDivergenceThreshold.
  std::optional<double> onset_time;
  /// Time the lifted state became non-finite or unreadable.
  std::optional<double> divergence_time;
  std::optional<double> t_lim_forced;
  std::string note;

  std::string label() const {
    return "nu" + std::to_string(truncation.n_nu) + "_z" + std::to_string(truncation.n_z);
  }
};

struct ScenarioResult {
  ScenarioConfig config;
  std::optional<double> t_lim;
  double dt = 0.0;
  double horizon = 0.0;
  std::optional<double> gamma_rms;
  std::optional<double> torque_integral;
  std::vector<SeriesResult> series;
  /// Nonlinear reference (times and states) shared by every truncation.
  RigidBodyTrajectory reference;
};

inline std::string truncation_label(const TruncationConfig& t, ScenarioKind kind) {
  if (kind == ScenarioKind::kAttitude) return std::to_string(t.n_nu);
  return std::to_string(t.n_nu) + "/" + std::to_string(t.n_z);
}

namespace detail {

inline SeriesResult run_truncation(const ScenarioResult& base, const TruncationConfig& tc) {
  const ScenarioConfig& cfg = base.config;
  const BodyParams params = cfg.params();
  const RigidBodyTrajectory& ref = base.reference;
  SeriesResult out;
  out.truncation = tc;

  LiftedSimOptions opt;
  opt.integration.dt = base.dt;
  opt.integration.horizon = base.horizon;
  opt.integration.record_every = cfg.record_every;
  opt.integration.on_nonfinite = OnNonFinite::kStop;
  opt.b_source = cfg.b_source;
  opt.jordan = cfg.jordan;
  const LiftedState x0 = lift(cfg.initial_state(), params, tc);
  const InputSignal input = cfg.input();
  const LiftedTrajectory lt = simulate_lifted(x0, input, params, opt);
  out.divergence_time = lt.nonfinite_time;

  // Samples available from both runs; the lifted run may stop early.
  std::size_t n = std::min(lt.t.size(), ref.t.size());
  std::vector<Vec3> nu_nl, nu_lt, p_nl, p_lt, v_nl, v_lt, eta_nl, eta_lt;
  for (std::size_t i = 0; i < n; ++i) {
    const RigidBodyState& s = ref.states[i];
    const VecX& x = lt.x[i];
    if (cfg.kind == ScenarioKind::kFull) {
      Reconstruction r;
      try {
        r = reconstruct(tc, x, lt.psi[i], params, lt.g0_aux[i]);
      } catch (const DegenerateGravityObservable& e) {
        out.divergence_time = lt.t[i];
        out.note = e.what();
        n = i;
        break;
      }
      p_nl.push_back(s.p);
      p_lt.push_back(r.p);
      v_nl.push_back(s.v);
      v_lt.push_back(r.v);
      const Vec3 eta = euler_from_rotation(s.R);
      eta_nl.push_back(eta);
      eta_lt.push_back(eta + angle_difference(r.eta, eta));
    }
    nu_nl.push_back(s.nu);
    nu_lt.push_back(x.segment<3>(0));
  }
  out.error.t.assign(lt.t.begin(), lt.t.begin() + static_cast<std::ptrdiff_t>(n));

  // Normalizers come from the full nonlinear reference, not the truncated part.
  std::vector<Vec3> ref_nu, ref_p, ref_v, ref_eta;
  for (const RigidBodyState& s : ref.states) {
    ref_nu.push_back(s.nu);
    ref_p.push_back(s.p);
    ref_v.push_back(s.v);
    ref_eta.push_back(euler_from_rotation(s.R));
  }
  auto add = [&](const std::string& q, std::span<const Vec3> a, std::span<const Vec3> b,
                 double norm) {
    out.error.normalizers[q] = norm;
    out.error.values[q] = error_metric(a, b, norm);
    double m = 0.0;
    for (double e : out.error.values[q]) m = std::max(m, e);
    out.error.maxima[q] = m;
  };
  add("nu", nu_nl, nu_lt, initial_or_max_norm(ref_nu));
  if (cfg.kind == ScenarioKind::kFull) {
    add("p", p_nl, p_lt, max_norm(ref_p));
    add("v", v_nl, v_lt, max_norm(ref_v));
    add("eta", eta_nl, eta_lt, max_norm(ref_eta));
    out.error.total =
        norm_of_maxima(out.error.maxima["p"], out.error.maxima["v"], out.error.maxima["eta"]);
  }
  for (std::size_t i = 0; i < out.error.t.size() && !out.onset_time; ++i) {
    for (const auto& [q, vals] : out.error.values) {
      if (vals[i] > kDivergenceThreshold) {
        out.onset_time = out.error.t[i];
        break;
      }
    }
  }
  if (base.gamma_rms && base.torque_integral && *base.torque_integral > 0.0) {
    out.t_lim_forced =
        t_lim_forced(params, *base.gamma_rms, *base.torque_integral, tc.n_nu);
  }
  return out;
}

}  // namespace detail

/// Runs the nonlinear reference once and every truncation against it.
/// Truncations run concurrently when jobs > 1; results keep config order.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg, int jobs = 1) {
  validate(cfg);
  ScenarioResult res;
  res.config = cfg;
  res.t_lim = scenario_t_lim(cfg);
  res.dt = resolve_time(cfg.dt, cfg.dt_unit, res.t_lim);
  res.horizon = resolve_time(cfg.horizon, cfg.horizon_unit, res.t_lim);
  const BodyParams params = cfg.params();
  IntegrationOptions io;
  io.dt = res.dt;
  io.horizon = res.horizon;
  io.record_every = cfg.record_every;
  io.on_nonfinite = OnNonFinite::kThrow;
  res.reference = integrate(params, cfg.initial_state(), cfg.input(), io);

  if (cfg.torque.active()) {
    std::vector<Vec3> nus;
    for (const RigidBodyState& s : res.reference.states) nus.push_back(s.nu);
    res.gamma_rms = gamma_rms(params, nus);
    res.torque_integral =
        sinusoid_torque_integral(cfg.torque.alpha, cfg.torque.beta, cfg.torque.rho);
  }

  res.series.resize(cfg.truncations.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < cfg.truncations.size(); ++i) {
      res.series[i] = detail::run_truncation(res, cfg.truncations[i]);
    }
  } else {
    for (std::size_t start = 0; start < cfg.truncations.size();
         start += static_cast<std::size_t>(jobs)) {
      std::vector<std::future<SeriesResult>> batch;
      const std::size_t end =
          std::min(cfg.truncations.size(), start + static_cast<std::size_t>(jobs));
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(std::async(std::launch::async, detail::run_truncation,
                                   std::cref(res), cfg.truncations[i]));
      }
      for (std::size_t i = start; i < end; ++i) res.series[i] = batch[i - start].get();
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Output

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

inline constexpr const char* kCsvHeader = "t,quantity,truncation,value\n";

/// CSV rows for one series, ordered by quantity then time.
inline std::string series_csv(const SeriesResult& s, ScenarioKind kind) {
  std::string out = kCsvHeader;
  const std::string label = truncation_label(s.truncation, kind);
  for (const auto& [q, vals] : s.error.values) {
    for (std::size_t i = 0; i < vals.size(); ++i) {
      out += format_double(s.error.t[i]);
      out += ',';
      out += q;
      out += ',';
      out += label;
      out += ',';
      out += format_double(vals[i]);
      out += '\n';
    }
  }
  return out;
}

inline Json optional_json(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

inline Json summary_json(const ScenarioResult& r) {
  Json series = Json::array();
  for (const SeriesResult& s : r.series) {
    Json maxima = Json::object();
    for (const auto& [q, m] : s.error.maxima) maxima[q] = m;
    Json norms = Json::object();
    for (const auto& [q, m] : s.error.normalizers) norms[q] = m;
    series.push_back({{"truncation", {s.truncation.n_nu, s.truncation.n_z}},
                      {"label", truncation_label(s.truncation, r.config.kind)},
                      {"csv", r.config.name + "_" + s.label() + ".csv"},
                      {"samples", s.error.t.size()},
                      {"maxima", maxima},
                      {"total", optional_json(s.error.total)},
                      {"normalizers", norms},
                      {"onset_time", optional_json(s.onset_time)},
                      {"divergence_time", optional_json(s.divergence_time)},
                      {"t_lim_forced", optional_json(s.t_lim_forced)},
                      {"note", s.note}});
  }
  return Json{
      {"scenario", r.config.name},
      {"t_lim", optional_json(r.t_lim)},
      {"dt", r.dt},
      {"horizon", r.horizon},
      {"gamma_rms", optional_json(r.gamma_rms)},
      {"torque_integral", optional_json(r.torque_integral)},
      {"normalization",
       "nu: ||nu(t0)|| (max over horizon if zero); p, v, eta: max over horizon of the "
       "nonlinear quantity"},
      {"series", series},
      {"config", to_json(r.config)},
  };
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error("write failed for " + path.string());
}

/// Writes <name>_<label>.csv per series and <name>_summary.json into dir.
inline std::vector<std::filesystem::path> emit_results(const ScenarioResult& r,
                                                       const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  for (const SeriesResult& s : r.series) {
    files.push_back(dir / (r.config.name + "_" + s.label() + ".csv"));
    write_text(files.back(), series_csv(s, r.config.kind));
  }
  files.push_back(dir / (r.config.name + "_summary.json"));
  write_text(files.back(), summary_json(r).dump(2) + "\n");
  return files;
}

}  // namespace koopman_rb
