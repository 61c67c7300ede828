#pragma once

// Scenario configuration: JSON ingestion, exhaustive validation and sweep-axis edits.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uwcog/baselines.hpp"
#include "uwcog/netmodel.hpp"

namespace uwcog::harness {

enum class Scheme { ccts, dcts, ctdm, ia, cfdm, dcts_fdm, silent };

std::string_view scheme_name(Scheme s);
/// Throws ConfigError on an unknown name.
Scheme parse_scheme(std::string_view name);
bool uses_fdm(Scheme s);

/// How the topology was given; sweeps over distance rescale a crossing layout.
struct CrossingLayout {
  double end_to_end_m = 10000.0;
  int pu_hops = 4;
  int su_hops = 4;
  double su_offset_m = -2700.0;
  double node_depth_m = 50.0;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::optional<CrossingLayout> crossing;  // empty for explicit node lists
  net::NetworkSpec network;
  double beta = 0.8;
  bool optimize_packets = false;
  std::optional<baselines::BandPlan> band_plan;
  baselines::IaOptions ia;
  int reuse = net::kReuseFactor;
  double neighbour_range_slots = 1.0;

  int horizon = 300;
  int runs = 30;
  std::uint64_t base_seed = 1;
  int threads = 0;  // 0: hardware concurrency
  int paper_horizon = 1000;
  int paper_runs = 100;
  std::vector<Scheme> schemes{Scheme::ccts, Scheme::dcts, Scheme::ctdm};

  std::string sweep_axis;  // empty when the file carries no sweep
  std::vector<double> sweep_values;
  std::optional<double> alpha1_ratio;  // alpha2 sweeps set alpha1 = ratio * alpha2
};

/// Parses and validates; every problem is reported with its field path in one ConfigError.
ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::filesystem::path& path);
/// Throws ConfigError listing every violated invariant.
void validate(const ScenarioConfig& cfg);

/// Horizon and run count of the full-scale study.
ScenarioConfig paper_scale(ScenarioConfig cfg);

/// Sweep axes: alpha1, alpha2, beta, fc (kHz), distance (m), packets (0/1), sigma_n, offset (m).
const std::vector<std::string>& sweep_axes();
/// Returns the config with one axis set; the result is validated.
ScenarioConfig with_axis(ScenarioConfig cfg, std::string_view axis, double value);

}  // namespace uwcog::harness
