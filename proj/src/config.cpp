#include "uwcog/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "uwcog/errors.hpp"

namespace uwcog::harness {

using nlohmann::json;

namespace {

constexpr std::pair<Scheme, std::string_view> kSchemes[] = {
    {Scheme::ccts, "ccts"}, {Scheme::dcts, "dcts"}, {Scheme::ctdm, "ctdm"},         {Scheme::ia, "ia"},
    {Scheme::cfdm, "cfdm"}, {Scheme::dcts_fdm, "dcts-fdm"}, {Scheme::silent, "silent"},
};

// Collects every problem of one document with its field path.
class Reader {
public:
  std::vector<std::string> issues;

  bool object(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) {
      issues.push_back(path + ": expected an object");
      return false;
    }
    for (const auto& [key, value] : j.items())
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        issues.push_back(join(path, key) + ": unknown field");
    return true;
  }

  template <typename T>
  void get(const json& j, const std::string& path, const char* key, T& out) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    try {
      if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw json::type_error::create(302, "expected a number", &v);
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw json::type_error::create(302, "expected an integer", &v);
      }
      out = v.get<T>();
    } catch (const json::exception&) {
      issues.push_back(join(path, key) + ": wrong type");
    }
  }

  void vec3_list(const json& j, const std::string& path, std::vector<net::Vec3>& out) {
    if (!j.is_array()) {
      issues.push_back(path + ": expected an array of [x, y, z] positions");
      return;
    }
    out.clear();
    for (std::size_t k = 0; k < j.size(); ++k) {
      const json& p = j[k];
      if (!p.is_array() || p.size() != 3 || !std::all_of(p.begin(), p.end(), [](const json& c) { return c.is_number(); })) {
        issues.push_back(path + "[" + std::to_string(k) + "]: expected [x, y, z]");
        continue;
      }
      out.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    }
  }

  static std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
  }
};

void collect(std::vector<std::string>& issues, const std::string& prefix, auto&& check) {
  try {
    check();
  } catch (const ConfigError& e) {
    for (const auto& s : e.issues()) issues.push_back(prefix.empty() ? s : prefix + ": " + s);
  }
}

void parse_band(Reader& r, const json& j, const std::string& path, channel::Band& band) {
  if (!r.object(j, path, {"center_khz", "bandwidth_khz"})) return;
  r.get(j, path, "center_khz", band.center_khz);
  r.get(j, path, "bandwidth_khz", band.bandwidth_khz);
}

}  // namespace

std::string_view scheme_name(Scheme s) {
  for (const auto& [k, name] : kSchemes)
    if (k == s) return name;
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  for (const auto& [k, n] : kSchemes)
    if (n == name) return k;
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

bool uses_fdm(Scheme s) { return s == Scheme::cfdm || s == Scheme::dcts_fdm; }

ScenarioConfig parse_config(const json& j) {
  Reader r;
  ScenarioConfig cfg;
  cfg.crossing = CrossingLayout{};
  auto& net = cfg.network;
  net.env.spreading_factor = 1.0;
  if (!r.object(j, "", {"name", "topology", "environment", "multipath", "band", "bit_rate_bps", "tx_power_db",
                        "slot_length_s", "traffic", "beta", "packets", "sensing", "band_plan", "ia", "dcts",
                        "experiment", "sweep"}))
    throw ConfigError(std::move(r.issues));
  r.get(j, "", "name", cfg.name);

  if (j.contains("topology")) {
    const json& t = j["topology"];
    if (r.object(t, "topology", {"layout", "end_to_end_m", "pu_hops", "su_hops", "su_offset_m", "node_depth_m",
                                 "pu_nodes", "su_nodes"})) {
      std::string layout = "crossing";
      r.get(t, "topology", "layout", layout);
      if (layout == "crossing") {
        auto& c = *cfg.crossing;
        r.get(t, "topology", "end_to_end_m", c.end_to_end_m);
        r.get(t, "topology", "pu_hops", c.pu_hops);
        r.get(t, "topology", "su_hops", c.su_hops);
        r.get(t, "topology", "su_offset_m", c.su_offset_m);
        r.get(t, "topology", "node_depth_m", c.node_depth_m);
        if (t.contains("pu_nodes") || t.contains("su_nodes"))
          r.issues.emplace_back("topology: node lists need layout \"explicit\"");
      } else if (layout == "explicit") {
        cfg.crossing.reset();
        if (!t.contains("pu_nodes") || !t.contains("su_nodes"))
          r.issues.emplace_back("topology: explicit layout needs pu_nodes and su_nodes");
        else {
          r.vec3_list(t["pu_nodes"], "topology.pu_nodes", net.topology.pu_nodes);
          r.vec3_list(t["su_nodes"], "topology.su_nodes", net.topology.su_nodes);
        }
      } else {
        r.issues.emplace_back("topology.layout: expected \"crossing\" or \"explicit\"");
      }
    }
  }
  if (j.contains("environment")) {
    const json& e = j["environment"];
    if (r.object(e, "environment", {"spreading_factor", "normalizing_constant", "shipping_activity", "wind_speed",
                                    "sound_speed"})) {
      r.get(e, "environment", "spreading_factor", net.env.spreading_factor);
      r.get(e, "environment", "normalizing_constant", net.env.normalizing_constant);
      r.get(e, "environment", "shipping_activity", net.env.shipping_activity);
      r.get(e, "environment", "wind_speed", net.env.wind_speed);
      r.get(e, "environment", "sound_speed", net.env.sound_speed);
    }
  }
  if (j.contains("multipath")) {
    const json& m = j["multipath"];
    auto& mp = net.multipath;
    if (r.object(m, "multipath", {"water_depth_m", "surface_reflection", "bottom_reflection", "length_deviation_std",
                                  "micropath_count", "micropath_delay_spread", "fit_samples", "fit_seed"})) {
      r.get(m, "multipath", "water_depth_m", mp.water_depth_m);
      r.get(m, "multipath", "surface_reflection", mp.surface_reflection);
      r.get(m, "multipath", "bottom_reflection", mp.bottom_reflection);
      r.get(m, "multipath", "length_deviation_std", mp.length_deviation_std);
      r.get(m, "multipath", "micropath_count", mp.micropath_count);
      r.get(m, "multipath", "micropath_delay_spread", mp.micropath_delay_spread);
      r.get(m, "multipath", "fit_samples", mp.fit_samples);
      r.get(m, "multipath", "fit_seed", mp.fit_seed);
    }
  }
  if (j.contains("band")) parse_band(r, j["band"], "band", net.band);
  r.get(j, "", "bit_rate_bps", net.bit_rate_bps);
  r.get(j, "", "tx_power_db", net.tx_power_db);
  r.get(j, "", "slot_length_s", net.slot_length_s);
  if (j.contains("traffic")) {
    const json& t = j["traffic"];
    if (r.object(t, "traffic", {"alpha1", "alpha2"})) {
      r.get(t, "traffic", "alpha1", net.traffic.alpha1);
      r.get(t, "traffic", "alpha2", net.traffic.alpha2);
    }
  }
  r.get(j, "", "beta", cfg.beta);
  if (j.contains("packets")) {
    const json& p = j["packets"];
    if (r.object(p, "packets", {"pu_bits", "su_bits", "min_su_bits", "optimize"})) {
      r.get(p, "packets", "pu_bits", net.pu_packet_bits);
      r.get(p, "packets", "su_bits", net.su_packet_bits);
      r.get(p, "packets", "min_su_bits", net.min_su_packet_bits);
      r.get(p, "packets", "optimize", cfg.optimize_packets);
    }
  }
  if (j.contains("sensing")) {
    const json& s = j["sensing"];
    if (r.object(s, "sensing", {"sigma_n", "range_slots"})) {
      if (s.contains("sigma_n") && !s["sigma_n"].is_null()) {
        double sigma = 0.0;
        r.get(s, "sensing", "sigma_n", sigma);
        net.sensing_sigma = sigma;
      }
      r.get(s, "sensing", "range_slots", net.sensing_range_slots);
    }
  }
  if (j.contains("band_plan") && !j["band_plan"].is_null()) {
    const json& b = j["band_plan"];
    baselines::BandPlan plan;
    if (r.object(b, "band_plan", {"channels", "guard_khz", "bit_rate_bps", "pu_assignment", "su_assignment"})) {
      if (b.contains("channels")) {
        if (!b["channels"].is_array()) r.issues.emplace_back("band_plan.channels: expected an array");
        else
          for (std::size_t k = 0; k < b["channels"].size(); ++k) {
            channel::Band band;
            parse_band(r, b["channels"][k], "band_plan.channels[" + std::to_string(k) + "]", band);
            plan.channels.push_back(band);
          }
      }
      r.get(b, "band_plan", "guard_khz", plan.guard_khz);
      r.get(b, "band_plan", "bit_rate_bps", plan.bit_rate_bps);
      r.get(b, "band_plan", "pu_assignment", plan.pu_assignment);
      r.get(b, "band_plan", "su_assignment", plan.su_assignment);
    }
    cfg.band_plan = plan;
  }
  if (j.contains("ia")) {
    const json& i = j["ia"];
    if (r.object(i, "ia", {"frame_slots", "overhead_slots", "access_probability"})) {
      r.get(i, "ia", "frame_slots", cfg.ia.frame_slots);
      r.get(i, "ia", "overhead_slots", cfg.ia.overhead_slots);
      r.get(i, "ia", "access_probability", cfg.ia.access_probability);
    }
  }
  if (j.contains("dcts")) {
    const json& d = j["dcts"];
    if (r.object(d, "dcts", {"reuse", "neighbour_range_slots"})) {
      r.get(d, "dcts", "reuse", cfg.reuse);
      r.get(d, "dcts", "neighbour_range_slots", cfg.neighbour_range_slots);
    }
  }
  if (j.contains("experiment")) {
    const json& e = j["experiment"];
    if (r.object(e, "experiment", {"horizon", "runs", "base_seed", "threads", "schemes", "paper_scale"})) {
      r.get(e, "experiment", "horizon", cfg.horizon);
      r.get(e, "experiment", "runs", cfg.runs);
      r.get(e, "experiment", "base_seed", cfg.base_seed);
      r.get(e, "experiment", "threads", cfg.threads);
      if (e.contains("schemes")) {
        std::vector<std::string> names;
        r.get(e, "experiment", "schemes", names);
        cfg.schemes.clear();
        for (const auto& n : names) try {
            cfg.schemes.push_back(parse_scheme(n));
          } catch (const ConfigError&) {
            r.issues.push_back("experiment.schemes: unknown scheme '" + n + "'");
          }
      }
      if (e.contains("paper_scale")) {
        const json& p = e["paper_scale"];
        if (r.object(p, "experiment.paper_scale", {"horizon", "runs"})) {
          r.get(p, "experiment.paper_scale", "horizon", cfg.paper_horizon);
          r.get(p, "experiment.paper_scale", "runs", cfg.paper_runs);
        }
      }
    }
  }
  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    if (r.object(s, "sweep", {"axis", "values", "alpha1_ratio"})) {
      r.get(s, "sweep", "axis", cfg.sweep_axis);
      r.get(s, "sweep", "values", cfg.sweep_values);
      if (s.contains("alpha1_ratio")) {
        double ratio = 0.0;
        r.get(s, "sweep", "alpha1_ratio", ratio);
        cfg.alpha1_ratio = ratio;
      }
    }
  }

  if (cfg.crossing) {
    const auto& c = *cfg.crossing;
    if (c.pu_hops < 1 || c.su_hops < 1 || !(c.end_to_end_m > 0.0))
      r.issues.emplace_back("topology: crossing layout needs positive length and hop counts");
    else
      net.topology = net::Topology::crossing(c.end_to_end_m, c.pu_hops, c.su_hops, c.su_offset_m, c.node_depth_m);
    net.multipath.node_depth_m = c.node_depth_m;
  } else if (!net.topology.pu_nodes.empty()) {
    net.multipath.node_depth_m = -net.topology.pu_nodes.front().z();
  }
  try {
    validate(cfg);
  } catch (const ConfigError& e) {
    r.issues.insert(r.issues.end(), e.issues().begin(), e.issues().end());
  }
  if (!r.issues.empty()) throw ConfigError(std::move(r.issues));
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": parse error: " + e.what());
  }
  return parse_config(j);
}

void validate(const ScenarioConfig& cfg) {
  std::vector<std::string> issues;
  const auto& net = cfg.network;
  const std::size_t before = issues.size();
  collect(issues, "topology", [&] { net.topology.validate(); });
  collect(issues, "environment", [&] { net.env.validate(); });
  collect(issues, "band", [&] { net.band.validate(); });
  collect(issues, "traffic", [&] { net.traffic.validate(); });
  if (issues.size() == before) collect(issues, "", [&] { net.validate(); });
  if (!(net.traffic.alpha1 < net.traffic.alpha2)) issues.emplace_back("traffic: alpha1 must be below alpha2");
  if (!(cfg.beta > 0.0 && cfg.beta <= 1.0)) issues.emplace_back("beta: must lie in (0, 1]");
  if (cfg.horizon < 1) issues.emplace_back("experiment.horizon: must be at least 1");
  if (cfg.runs < 1) issues.emplace_back("experiment.runs: must be at least 1");
  if (cfg.threads < 0) issues.emplace_back("experiment.threads: must be non-negative");
  if (cfg.paper_horizon < 1 || cfg.paper_runs < 1) issues.emplace_back("experiment.paper_scale: must be positive");
  if (cfg.reuse != 0 && cfg.reuse != net::kReuseFactor) issues.emplace_back("dcts.reuse: must be 0 or 3");
  if (!(cfg.neighbour_range_slots > 0.0)) issues.emplace_back("dcts.neighbour_range_slots: must be positive");
  if (cfg.ia.frame_slots < 1 || cfg.ia.overhead_slots < 0 || cfg.ia.overhead_slots >= cfg.ia.frame_slots)
    issues.emplace_back("ia: need 0 <= overhead_slots < frame_slots");
  if (!(cfg.ia.access_probability >= 0.0 && cfg.ia.access_probability <= 1.0))
    issues.emplace_back("ia.access_probability: must lie in [0, 1]");
  if (cfg.schemes.empty()) issues.emplace_back("experiment.schemes: at least one scheme");
  std::set<Scheme> seen;
  for (Scheme s : cfg.schemes) {
    if (!seen.insert(s).second) issues.push_back("experiment.schemes: '" + std::string(scheme_name(s)) + "' listed twice");
    if (uses_fdm(s) && !cfg.band_plan)
      issues.push_back("band_plan: required by scheme '" + std::string(scheme_name(s)) + "'");
    if (s == Scheme::ccts && net.topology.su_hops() > 6) issues.emplace_back("experiment.schemes: ccts supports at most 6 SU hops");
  }
  if (cfg.band_plan)
    collect(issues, "", [&] { cfg.band_plan->validate(net.band, net.topology.pu_hops(), net.topology.su_hops()); });
  if (!cfg.sweep_axis.empty()) {
    const auto& axes = sweep_axes();
    if (std::find(axes.begin(), axes.end(), cfg.sweep_axis) == axes.end())
      issues.push_back("sweep.axis: unknown axis '" + cfg.sweep_axis + "'");
    if (cfg.sweep_values.empty()) issues.emplace_back("sweep.values: at least one value");
  }
  if (cfg.alpha1_ratio && !(*cfg.alpha1_ratio >= 0.0 && *cfg.alpha1_ratio < 1.0))
    issues.emplace_back("sweep.alpha1_ratio: must lie in [0, 1)");
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

ScenarioConfig paper_scale(ScenarioConfig cfg) {
  cfg.horizon = cfg.paper_horizon;
  cfg.runs = cfg.paper_runs;
  return cfg;
}

const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes{"alpha1", "alpha2", "beta", "fc", "distance", "packets", "sigma_n", "offset"};
  return axes;
}

ScenarioConfig with_axis(ScenarioConfig cfg, std::string_view axis, double value) {
  auto& net = cfg.network;
  auto rebuild = [&] {
    const auto& c = *cfg.crossing;
    net.topology = net::Topology::crossing(c.end_to_end_m, c.pu_hops, c.su_hops, c.su_offset_m, c.node_depth_m);
  };
  if (axis == "alpha1") {
    net.traffic.alpha1 = value;
  } else if (axis == "alpha2") {
    net.traffic.alpha2 = value;
    if (cfg.alpha1_ratio) net.traffic.alpha1 = *cfg.alpha1_ratio * value;
  } else if (axis == "beta") {
    cfg.beta = value;
  } else if (axis == "fc") {
    const double shift = value - net.band.center_khz;
    net.band.center_khz = value;
    if (cfg.band_plan)
      for (auto& c : cfg.band_plan->channels) c.center_khz += shift;
  } else if (axis == "distance") {
    if (!cfg.crossing) throw ConfigError("sweep.axis distance: needs a crossing layout");
    auto& c = *cfg.crossing;
    const double old_hop = c.end_to_end_m / std::min(c.pu_hops, c.su_hops);
    c.su_offset_m *= value / c.end_to_end_m;
    c.end_to_end_m = value;
    // the slot keeps its idle margin after the longest hop delay
    net.slot_length_s += (value / std::min(c.pu_hops, c.su_hops) - old_hop) / net.env.sound_speed;
    rebuild();
  } else if (axis == "offset") {
    if (!cfg.crossing) throw ConfigError("sweep.axis offset: needs a crossing layout");
    cfg.crossing->su_offset_m = value;
    rebuild();
  } else if (axis == "packets") {
    cfg.optimize_packets = value != 0.0;
  } else if (axis == "sigma_n") {
    net.sensing_sigma = value;
  } else {
    throw ConfigError("unknown sweep axis '" + std::string(axis) + "'");
  }
  validate(cfg);
  return cfg;
}

}  // namespace uwcog::harness
