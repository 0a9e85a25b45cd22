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

// koopman_rb_cli: validation sweeps, bound and controllability queries and the
// quadrotor square flight.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "koopman_rb/presets.hpp"

namespace {

using namespace koopman_rb;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct RunFlags {
  std::string preset;
  std::string config;
  std::string out = "out";
  std::vector<std::string> overrides;
  bool json = false;
  int jobs = 1;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  app->add_option("--preset", f.preset, "Named scenario (see `presets`)");
  app->add_option("--config", f.config, "Scenario JSON file")->check(CLI::ExistingFile);
  app->add_option("--out", f.out, "Output directory (created if absent)");
  app->add_option("--set", f.overrides, "Override key=value with dotted keys")
      ->take_all();
  app->add_flag("--json", f.json, "Print the JSON summary instead of a table");
  app->add_option("--jobs", f.jobs, "Truncations simulated concurrently")
      ->check(CLI::PositiveNumber);
}

/// Resolves --preset / --config and applies overrides (CLI > file > defaults).
AnyScenario load_scenario(const RunFlags& f) {
  if (f.preset.empty() == f.config.empty()) {
    throw ConfigError("give exactly one of --preset or --config");
  }
  Json j;
  if (!f.preset.empty()) {
    const auto p = find_preset(f.preset);
    if (!p) throw ConfigError("unknown preset '" + f.preset + "'");
    j = to_json(p->config);
  } else {
    // Fill defaults first so that every schema key is addressable by --set.
    j = to_json(any_scenario_from_json(read_json_file(f.config)));
  }
  for (const std::string& o : f.overrides) apply_override(j, o);
  return any_scenario_from_json(j);
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", *v);
  return buf;
}

std::string fmt(double v) { return fmt(std::optional<double>(v)); }

void print_scenario_table(const ScenarioResult& r) {
  std::cout << "scenario " << r.config.name << "  t_lim " << fmt(r.t_lim) << " s  horizon "
            << fmt(r.horizon) << " s  dt " << fmt(r.dt) << " s\n";
  if (r.gamma_rms) {
    std::cout << "gamma_rms " << fmt(r.gamma_rms) << "  M_int " << fmt(r.torque_integral)
              << "\n";
  }
  std::printf("%-8s %-10s %-10s %-10s %-10s %-10s %-10s %-10s\n", "N", "max nu", "max p",
              "max v", "max eta", "total", "onset", "diverged");
  for (const SeriesResult& s : r.series) {
    auto m = [&](const char* q) {
      auto it = s.error.maxima.find(q);
      return it == s.error.maxima.end() ? std::string("-") : fmt(it->second);
    };
    std::printf("%-8s %-10s %-10s %-10s %-10s %-10s %-10s %-10s\n",
                truncation_label(s.truncation, r.config.kind).c_str(), m("nu").c_str(),
                m("p").c_str(), m("v").c_str(), m("eta").c_str(), fmt(s.error.total).c_str(),
                fmt(s.onset_time).c_str(), fmt(s.divergence_time).c_str());
  }
}

int run_validate(const RunFlags& f, ScenarioKind expected) {
  const AnyScenario any = load_scenario(f);
  const auto* cfg = std::get_if<ScenarioConfig>(&any);
  if (!cfg || cfg->kind != expected) {
    throw ConfigError(std::string("scenario is not a ") +
                      (expected == ScenarioKind::kAttitude ? "attitude" : "full") +
                      " validation run");
  }
  const ScenarioResult r = run_scenario(*cfg, f.jobs);
  const auto files = emit_results(r, f.out);
  if (f.json) {
    std::cout << summary_json(r).dump(2) << "\n";
  } else {
    print_scenario_table(r);
    std::cout << "wrote " << files.size() << " files to " << f.out << "\n";
  }
  return 0;
}

int run_quad(const RunFlags& f) {
  const AnyScenario any = load_scenario(f);
  const auto* cfg = std::get_if<QuadScenarioConfig>(&any);
  if (!cfg) throw ConfigError("scenario is not a quadrotor run");
  const QuadRunReport r = run_quad_scenario(*cfg);
  emit_quad_results(*cfg, r, f.out);
  if (f.json) {
    std::cout << quad_summary_json(*cfg, r).dump(2) << "\n";
    return 0;
  }
  std::cout << "scenario " << cfg->name << "\n"
            << "riccati residual      " << fmt(r.controller.riccati_residual) << "\n"
            << "spectral abscissa     " << fmt(r.controller.closed_loop_abscissa) << "\n"
            << "max tracking error    " << fmt(r.max_tracking_error) << " m ("
            << fmt(100.0 * r.max_tracking_error / r.side) << " % of side)\n"
            << "corner errors         ";
  for (double e : r.corner_errors) std::cout << fmt(e) << " ";
  std::cout << "m\n"
            << "thrust range          [" << fmt(r.thrust_min) << ", " << fmt(r.thrust_max)
            << "] N\n"
            << "max |M|               " << fmt(r.torque_norm_max) << " N m\n"
            << "residual < 20 %       " << fmt(100.0 * r.residual_fraction_below_20pct)
            << " % of samples (median " << fmt(r.residual_median) << ", max "
            << fmt(r.residual_max) << ")\n"
            << "wrote " << f.out << "/" << cfg->name << "_{log.csv,summary.json}\n";
  return 0;
}

struct BodyFlags {
  std::string inertia = "J0";
  std::vector<double> inertia_diagonal;
  std::vector<double> nu{1e-3};
  double mass = 1.0;
};

void add_body_flags(CLI::App* app, BodyFlags& b) {
  app->add_option("--inertia", b.inertia, "Named inertia J0..J4, JQ, JI");
  app->add_option("--inertia-diagonal", b.inertia_diagonal, "Custom Jx Jy Jz")
      ->expected(3);
  app->add_option("--nu", b.nu, "Angular velocity: one value per axis or three values")
      ->expected(1, 3);
  app->add_option("--mass", b.mass, "Mass [kg]");
}

BodyParams body_params(const BodyFlags& b) {
  BodyParams p;
  if (!b.inertia_diagonal.empty()) {
    p.inertia_diagonal = Vec3(b.inertia_diagonal[0], b.inertia_diagonal[1], b.inertia_diagonal[2]);
  } else if (auto j = named_inertia(b.inertia)) {
    p.inertia_diagonal = *j;
  } else {
    throw ConfigError("unknown inertia '" + b.inertia + "'");
  }
  p.mass = b.mass;
  try {
    p.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return p;
}

Vec3 body_nu(const BodyFlags& b) {
  if (b.nu.size() == 1) return Vec3::Constant(b.nu[0]);
  if (b.nu.size() == 3) return Vec3(b.nu[0], b.nu[1], b.nu[2]);
  throw ConfigError("--nu takes one or three values");
}

int run_bounds(const BodyFlags& b, int K, double torque, bool json) {
  const BodyParams p = body_params(b);
  const Vec3 nu = body_nu(b);
  const Vec3 gamma = p.inertia_diagonal.cwiseProduct(nu);
  const BoundReport r = attitude_bounds(p, gamma.norm(), nu.norm(), K, torque);
  const AttitudeLadder ladder = build_attitude_ladder(nu, p, K + 1);
  if (json) {
    Json j{{"j_inv_norm", r.j_inv_norm},
           {"gamma_norm", r.gamma_norm},
           {"nu_norm", r.nu_norm},
           {"torque_norm", r.torque_norm},
           {"t_lim", optional_json(r.t_lim)},
           {"nu_bound", r.nu_bound},
           {"nu_bound_relaxed", r.nu_bound_relaxed},
           {"gamma_bound", r.gamma_bound},
           {"H_bound", r.H_bound},
           {"H_bound_relaxed", r.H_bound_relaxed},
           {"nu_dot_bound", r.nu_dot_bound},
           {"nu_dot_bound_relaxed", r.nu_dot_bound_relaxed}};
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::cout << "||J^-1|| " << fmt(r.j_inv_norm) << "  ||gamma|| " << fmt(r.gamma_norm)
            << "  t_lim " << fmt(r.t_lim) << " s\n";
  std::printf("%-4s %-11s %-11s %-11s %-11s %-11s %-11s\n", "k", "|nu_k|", "bound",
              "relaxed", "|H_k|", "bound", "relaxed");
  for (int k = 0; k <= K; ++k) {
    const double hn = Eigen::JacobiSVD<Mat3>(ladder.H[k]).singularValues()(0);
    std::printf("%-4d %-11s %-11s %-11s %-11s %-11s %-11s\n", k,
                fmt(ladder.nu[k].norm()).c_str(), fmt(r.nu_bound[k]).c_str(),
                fmt(r.nu_bound_relaxed[k]).c_str(), fmt(hn).c_str(),
                fmt(r.H_bound[k]).c_str(), fmt(r.H_bound_relaxed[k]).c_str());
  }
  return 0;
}

int run_controllability(const BodyFlags& b, int n_lo, int n_hi, int random, unsigned seed,
                        bool json) {
  const BodyParams p = body_params(b);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Vec3> states{body_nu(b)};
  for (int i = 0; i < random; ++i) {
    states.push_back(Vec3(normal(rng), normal(rng), normal(rng)).normalized() *
                     std::uniform_real_distribution<double>(0.01, 1.0)(rng));
  }
  Json rows = Json::array();
  if (!json) std::printf("%-4s %-10s %-10s %-12s\n", "N", "states", "full rank", "min rank");
  for (int n = n_lo; n <= n_hi; ++n) {
    int full = 0, min_rank = 6;
    double tol = 0.0;
    for (const Vec3& nu : states) {
      RigidBodyState s;
      s.nu = nu;
      const ControllabilityReport r = controllability_at(s, p, {n, n});
      full += r.full_rank;
      min_rank = std::min(min_rank, r.rank);
      tol = std::max(tol, r.tolerance);
    }
    rows.push_back({{"N", n}, {"states", states.size()}, {"full_rank", full},
                    {"min_rank", min_rank}, {"max_tolerance", tol}});
    if (!json) {
      std::printf("%-4d %-10zu %-10d %-12d\n", n, states.size(), full, min_rank);
    }
  }
  if (json) std::cout << rows.dump(2) << "\n";
  return 0;
}

int list_presets(bool json, const std::string& write_dir) {
  const std::vector<Preset> all = presets();
  if (!write_dir.empty()) {
    std::filesystem::create_directories(write_dir);
    for (const Preset& p : all) {
      write_text(std::filesystem::path(write_dir) / (p.name + ".json"),
                 to_json(p.config).dump(2) + "\n");
    }
  }
  if (json) {
    Json j = Json::array();
    for (const Preset& p : all) j.push_back({{"name", p.name}, {"description", p.description()}});
    std::cout << j.dump(2) << "\n";
  } else {
    for (const Preset& p : all) std::printf("%-12s %s\n", p.name.c_str(), p.description().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Koopman lifting of rigid-body dynamics"};
  app.require_subcommand(1);

  RunFlags att_flags, full_flags, quad_flags;
  add_run_flags(app.add_subcommand("validate-attitude", "Attitude lifting error sweep"),
                att_flags);
  add_run_flags(app.add_subcommand("validate-full", "Position and attitude error sweep"),
                full_flags);
  add_run_flags(app.add_subcommand("simulate-quad", "Quadrotor square-trajectory flight"),
                quad_flags);

  BodyFlags bounds_body;
  int bounds_k = 12;
  double bounds_torque = 0.0;
  bool bounds_json = false;
  CLI::App* bounds = app.add_subcommand("bounds", "t_lim and ladder norm bounds");
  add_body_flags(bounds, bounds_body);
  bounds->add_option("--K", bounds_k, "Largest ladder index")->check(CLI::Range(0, 19));
  bounds->add_option("--torque-norm", bounds_torque, "||M|| for the forced bound");
  bounds->add_flag("--json", bounds_json);

  BodyFlags ctrl_body;
  int ctrl_lo = 2, ctrl_hi = 12, ctrl_random = 0;
  unsigned ctrl_seed = 1;
  bool ctrl_json = false;
  CLI::App* ctrl = app.add_subcommand("controllability", "Jordan last-row rank test");
  add_body_flags(ctrl, ctrl_body);
  ctrl->add_option("--n-min", ctrl_lo, "Smallest N_nu = N_z")->check(CLI::Range(1, 64));
  ctrl->add_option("--n-max", ctrl_hi, "Largest N_nu = N_z")->check(CLI::Range(1, 64));
  ctrl->add_option("--random", ctrl_random, "Additional random nonzero states");
  ctrl->add_option("--seed", ctrl_seed);
  ctrl->add_flag("--json", ctrl_json);

  bool presets_json = false;
  std::string presets_write;
  CLI::App* list = app.add_subcommand("presets", "List the named scenarios");
  list->add_flag("--json", presets_json);
  list->add_option("--write", presets_write, "Also write every preset as <dir>/<name>.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (app.got_subcommand("validate-attitude")) {
      return run_validate(att_flags, ScenarioKind::kAttitude);
    }
    if (app.got_subcommand("validate-full")) return run_validate(full_flags, ScenarioKind::kFull);
    if (app.got_subcommand("simulate-quad")) return run_quad(quad_flags);
    if (app.got_subcommand("bounds")) {
      return run_bounds(bounds_body, bounds_k, bounds_torque, bounds_json);
    }
    if (app.got_subcommand("controllability")) {
      return run_controllability(ctrl_body, ctrl_lo, ctrl_hi, ctrl_random, ctrl_seed,
                                 ctrl_json);
    }
    return list_presets(presets_json, presets_write);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InfiniteHorizon& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
