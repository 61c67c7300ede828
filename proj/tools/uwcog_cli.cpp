// uwcog-cli: plan, run and sweep the cognitive underwater scheduling schemes.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "uwcog/baselines.hpp"
#include "uwcog/config.hpp"
#include "uwcog/errors.hpp"
#include "uwcog/experiment.hpp"
#include "uwcog/planner_central.hpp"
#include "uwcog/planner_decentral.hpp"

namespace fs = std::filesystem;
using namespace uwcog;
using namespace uwcog::harness;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> schemes;
  std::string sweep;
  std::string values;
  std::uint64_t seed = 0;
  int runs = 0;
  int horizon = 0;
  int threads = -1;
  bool paper_scale = false;
  std::string out = ".";
};

void add_common(CLI::App* app, Common& c, bool with_scheme) {
  app->add_option("--config", c.config, "Scenario JSON")->required();
  if (with_scheme)
    app->add_option("--scheme", c.schemes, "ccts|dcts|ctdm|ia|cfdm|dcts-fdm|silent (repeatable)")->delimiter(',');
  app->add_option("--seed", c.seed, "Base seed (run k uses seed + k)");
  app->add_option("--runs", c.runs, "Monte Carlo runs");
  app->add_option("--horizon", c.horizon, "Slots per episode");
  app->add_option("--threads", c.threads, "Worker threads, 0 for all cores");
  app->add_flag("--paper-scale", c.paper_scale, "Use the paper's horizon and run count");
  app->add_option("--out", c.out, "Output directory");
}

ScenarioConfig load(const Common& c, CLI::App* app) {
  ScenarioConfig cfg = load_config(c.config);
  if (c.paper_scale) cfg = paper_scale(cfg);
  if (app->count("--seed")) cfg.base_seed = c.seed;
  if (app->count("--runs")) cfg.runs = c.runs;
  if (app->count("--horizon")) cfg.horizon = c.horizon;
  if (app->count("--threads")) cfg.threads = c.threads;
  if (!c.schemes.empty()) {
    cfg.schemes.clear();
    for (const auto& s : c.schemes) cfg.schemes.push_back(parse_scheme(s));
  }
  validate(cfg);
  return cfg;
}

std::ofstream open_out(const Common& c, const std::string& name) {
  fs::create_directories(c.out);
  const fs::path p = fs::path(c.out) / name;
  std::ofstream f(p);
  if (!f) throw ConfigError(p.string() + ": cannot write");
  f.precision(17);
  return f;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size()) throw ConfigError("--values: bad number '" + cell + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--values: empty list");
  return out;
}

void print_table(const SweepTable& t) {
  std::cout << t.axis << "\tscheme\tpu_bits\tsu_bits\ttotal_bits\tpu_ratio\n";
  for (const auto& r : t.rows)
    std::cout << r.value << '\t' << scheme_name(r.scheme) << '\t' << r.metrics.pu_bits.mean << " +- "
              << r.metrics.pu_bits.se << '\t' << r.metrics.su_bits.mean << " +- " << r.metrics.su_bits.se << '\t'
              << r.metrics.total_bits.mean << " +- " << r.metrics.total_bits.se << '\t' << r.metrics.pu_ratio << '\n';
}

void write_table(const Common& c, const SweepTable& t) {
  auto a = open_out(c, "results.csv");
  write_results_csv(a, t);
  auto b = open_out(c, "results_long.csv");
  write_long_csv(b, t);
  auto r = open_out(c, "runs.csv");
  write_runs_csv(r, t);
}

void cmd_plan(const ScenarioConfig& cfg, const Common& c) {
  const Scheme s = cfg.schemes.front();
  const decentral::DctsOptions opt{cfg.horizon, cfg.beta, cfg.reuse, cfg.optimize_packets, cfg.neighbour_range_slots};
  if (s == Scheme::ccts) {
    const net::Network net(cfg.network);
    const net::TransitionModel model(net);
    const central::PlanTable plan(model, {cfg.horizon, cfg.beta});
    auto f = open_out(c, "plan_ccts.csv");
    plan.write_csv(f);
    std::cout << "ccts: " << model.states().size() << " states, " << plan.basis_count() << " basis beliefs per slot\n";
  } else if (s == Scheme::dcts || s == Scheme::dcts_fdm) {
    const auto scheme = s == Scheme::dcts ? decentral::plan_dcts(cfg.network, opt)
                                          : baselines::plan_dcts_fdm(cfg.network, *cfg.band_plan, opt);
    for (const auto& p : scheme.plans) {
      auto f = open_out(c, "plan_" + std::string(scheme_name(s)) + "_su" + std::to_string(p.su_hop()) + ".csv");
      p.write_csv(f);
      std::cout << scheme_name(s) << " SU " << p.su_hop() << ": " << p.state_count() << " local states\n";
    }
  } else {
    throw ConfigError("plan: scheme '" + std::string(scheme_name(s)) + "' has no offline plan");
  }
}

void cmd_packets(const ScenarioConfig& cfg, const Common& c) {
  const net::Network net(cfg.network);
  auto f = open_out(c, "packets.csv");
  f << "su_hop,candidate_bits,objective,chosen\n";
  for (int i = 1; i <= net.su_hops(); ++i) {
    const auto p = decentral::optimize_packet_size(net, i, cfg.beta, cfg.reuse, cfg.neighbour_range_slots);
    for (std::size_t k = 0; k < p.candidates.size(); ++k)
      f << i << ',' << p.candidates[k] << ',' << p.objectives[k] << ',' << (p.candidates[k] == p.chosen_bits) << '\n';
    std::cout << "SU " << i << ": " << p.chosen_bits << " bits (" << p.chosen_bits / 8 << " bytes)\n";
  }
}

void cmd_dump(const ScenarioConfig& cfg, const Common& c) {
  const net::Network net(cfg.network);
  auto links = open_out(c, "links.csv");
  links << "link,kind,hop,tx_node,rx_node,length_m,channel,center_khz,bandwidth_khz,bit_rate_bps,packet_bits,noise_power,"
           "mu_ln_gain,sigma_ln_gain\n";
  for (int l = 0; l < net.link_count(); ++l) {
    const auto& k = net.link(l);
    links << l << ',' << (k.kind == net::LinkKind::primary ? "pu" : "su") << ',' << k.hop << ',' << k.tx_node << ','
          << k.rx_node << ',' << k.length() << ',' << k.channel.channel << ',' << k.channel.band.center_khz << ','
          << k.channel.band.bandwidth_khz << ',' << k.channel.bit_rate_bps << ',' << k.packet_bits << ','
          << k.noise_power << ',' << k.gain.mu_ln_gain << ',' << k.gain.sigma_ln_gain << '\n';
  }
  auto ov = open_out(c, "overlap.csv");
  ov << "interferer,victim,same_channel,arrival_offset_s,overlap_start_s,overlap_end_s,first_bit,last_bit,power\n";
  for (const auto& e : net.overlap().entries()) {
    if (e.interferer == e.victim) continue;
    ov << e.interferer << ',' << e.victim << ',' << e.same_channel << ',' << e.arrival_offset_s << ','
       << e.overlap_start_s << ',' << e.overlap_end_s << ',' << e.first_bit << ',' << e.last_bit << ',' << e.power << '\n';
  }
  auto sn = open_out(c, "sensing.csv");
  sn << "su_hop,sigma";
  for (int j = 1; j <= net.pu_hops(); ++j) sn << ",c_pu" << j;
  sn << '\n';
  for (int i = 1; i <= net.su_hops(); ++i) {
    sn << i << ',' << net.sensing_sigma()(i - 1);
    for (int j = 1; j <= net.pu_hops(); ++j) sn << ',' << net.sensing_pu()(i - 1, j - 1);
    sn << '\n';
  }
  const net::TransitionModel model(net);
  auto tm = open_out(c, "transitions.csv");
  model.write_csv(tm);
  std::cout << net.link_count() << " links, " << model.states().size() << " joint states\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interference-constrained scheduling for cognitive multi-hop underwater acoustic networks"};
  app.require_subcommand(1);
  Common c;
  auto* plan = app.add_subcommand("plan", "Offline planning; writes plan tables");
  add_common(plan, c, true);
  auto* run = app.add_subcommand("run", "Monte Carlo runs of the selected schemes");
  add_common(run, c, true);
  auto* sweep = app.add_subcommand("sweep", "Sweep one scenario axis");
  add_common(sweep, c, true);
  sweep->add_option("--sweep", c.sweep, "alpha1|alpha2|beta|fc|distance|packets|sigma_n|offset");
  sweep->add_option("--values", c.values, "Comma-separated axis values");
  auto* packets = app.add_subcommand("optimize-packets", "Per-hop SU packet sizes");
  add_common(packets, c, false);
  auto* dump = app.add_subcommand("dump-model", "Links, overlap, sensing and transition tables");
  add_common(dump, c, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    CLI::App* used = app.get_subcommands().front();
    const ScenarioConfig cfg = load(c, used);
    if (used == plan) {
      cmd_plan(cfg, c);
    } else if (used == run) {
      const auto table = run_sweep(cfg, "", {}, cfg.schemes);
      write_table(c, table);
      print_table(table);
    } else if (used == sweep) {
      const std::string axis = c.sweep.empty() ? cfg.sweep_axis : c.sweep;
      if (axis.empty()) throw ConfigError("sweep: no axis given (--sweep or sweep.axis)");
      const auto values = c.values.empty() ? cfg.sweep_values : parse_values(c.values);
      if (values.empty()) throw ConfigError("sweep: no values given (--values or sweep.values)");
      const auto table = run_sweep(cfg, axis, values, cfg.schemes);
      write_table(c, table);
      print_table(table);
    } else if (used == packets) {
      cmd_packets(cfg, c);
    } else {
      cmd_dump(cfg, c);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error:\n";
    for (const auto& issue : e.issues()) std::cerr << "  " << issue << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
