#include "uwcog/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "uwcog/baselines.hpp"
#include "uwcog/errors.hpp"
#include "uwcog/planner_central.hpp"
#include "uwcog/planner_decentral.hpp"

namespace uwcog::harness {

namespace {

class CctsPlanned final : public PlannedScheme {
public:
  explicit CctsPlanned(const ScenarioConfig& cfg)
      : net_(cfg.network), model_(net_), plan_(model_, central::PlanOptions{cfg.horizon, cfg.beta}) {}
  Scheme scheme() const override { return Scheme::ccts; }
  EpisodeResult run(const EpisodeOptions& o) const override { return central::run_episode(net_, model_, plan_, o); }
  EpisodeResult run_silent(const EpisodeOptions& o) const override { return baselines::run_silent(net_, o); }

private:
  net::Network net_;
  net::TransitionModel model_;
  central::PlanTable plan_;
};

class DctsPlanned final : public PlannedScheme {
public:
  DctsPlanned(Scheme which, decentral::DctsScheme scheme) : which_(which), scheme_(std::move(scheme)) {}
  Scheme scheme() const override { return which_; }
  EpisodeResult run(const EpisodeOptions& o) const override { return decentral::run_episode(scheme_, o); }
  EpisodeResult run_silent(const EpisodeOptions& o) const override { return baselines::run_silent(scheme_.net, o); }

private:
  Scheme which_;
  decentral::DctsScheme scheme_;
};

class LocalPlanned final : public PlannedScheme {
public:
  LocalPlanned(Scheme which, baselines::LocalScheme scheme) : which_(which), scheme_(std::move(scheme)) {}
  Scheme scheme() const override { return which_; }
  EpisodeResult run(const EpisodeOptions& o) const override {
    return which_ == Scheme::cfdm ? baselines::run_cfdm(scheme_, o) : baselines::run_ctdm(scheme_, o);
  }
  EpisodeResult run_silent(const EpisodeOptions& o) const override { return baselines::run_silent(scheme_.net, o); }

private:
  Scheme which_;
  baselines::LocalScheme scheme_;
};

class NetworkPlanned final : public PlannedScheme {
public:
  NetworkPlanned(Scheme which, const ScenarioConfig& cfg) : which_(which), net_(cfg.network), ia_(cfg.ia) {}
  Scheme scheme() const override { return which_; }
  EpisodeResult run(const EpisodeOptions& o) const override {
    return which_ == Scheme::ia ? baselines::run_ia(net_, ia_, o) : baselines::run_silent(net_, o);
  }
  EpisodeResult run_silent(const EpisodeOptions& o) const override { return baselines::run_silent(net_, o); }

private:
  Scheme which_;
  net::Network net_;
  baselines::IaOptions ia_;
};

std::string format(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
  double x = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("csv: bad number '" + s + "'");
  return x;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct MetricField {
  const char* name;
  Statistic RunMetrics::*field;
};

constexpr MetricField kMetrics[] = {
    {"pu_bits", &RunMetrics::pu_bits},
    {"su_bits", &RunMetrics::su_bits},
    {"total_bits", &RunMetrics::total_bits},
    {"silent_pu_bits", &RunMetrics::silent_pu_bits},
    {"pu_per_slot", &RunMetrics::pu_per_slot},
    {"total_per_slot", &RunMetrics::total_per_slot},
    {"spectral_efficiency", &RunMetrics::spectral_efficiency},
    {"constraint_margin", &RunMetrics::constraint_margin},
};

std::string context(const std::string& axis, double value, Scheme s) {
  std::ostringstream os;
  os << "[" << axis << "=" << format(value) << ", scheme " << scheme_name(s) << "] ";
  return os.str();
}

}  // namespace

std::unique_ptr<PlannedScheme> plan_scheme(const ScenarioConfig& cfg, Scheme scheme) {
  const decentral::DctsOptions dcts{cfg.horizon, cfg.beta, cfg.reuse, cfg.optimize_packets, cfg.neighbour_range_slots};
  switch (scheme) {
    case Scheme::ccts:
      return std::make_unique<CctsPlanned>(cfg);
    case Scheme::dcts:
      return std::make_unique<DctsPlanned>(scheme, decentral::plan_dcts(cfg.network, dcts));
    case Scheme::ctdm:
      return std::make_unique<LocalPlanned>(scheme, baselines::plan_ctdm(cfg.network, cfg.beta, cfg.neighbour_range_slots));
    case Scheme::cfdm:
      if (!cfg.band_plan) throw ConfigError("band_plan: required by scheme 'cfdm'");
      return std::make_unique<LocalPlanned>(
          scheme, baselines::plan_cfdm(cfg.network, *cfg.band_plan, cfg.beta, cfg.neighbour_range_slots));
    case Scheme::dcts_fdm:
      if (!cfg.band_plan) throw ConfigError("band_plan: required by scheme 'dcts-fdm'");
      return std::make_unique<DctsPlanned>(scheme, baselines::plan_dcts_fdm(cfg.network, *cfg.band_plan, dcts));
    case Scheme::ia:
    case Scheme::silent:
      return std::make_unique<NetworkPlanned>(scheme, cfg);
  }
  throw ContractViolation("plan_scheme: unknown scheme");
}

EpisodeOptions run_options(const ScenarioConfig& cfg, int run_index) {
  EpisodeOptions o;
  o.horizon = cfg.horizon;
  o.seed = cfg.base_seed + static_cast<std::uint64_t>(run_index);
  o.run = 0;
  return o;
}

Statistic summarize(const std::vector<double>& xs) {
  Statistic s;
  s.n = static_cast<int>(xs.size());
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / s.n;
  if (s.n > 1) {
    double sq = 0.0;
    for (double x : xs) sq += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(sq / (s.n - 1) / s.n);
  }
  return s;
}

RunMetrics compute_metrics(const std::vector<RunRecord>& runs, int horizon, double slot_s, double band_hz, double beta) {
  if (runs.empty()) throw ContractViolation("compute_metrics: no runs");
  if (horizon < 1 || !(slot_s > 0.0) || !(band_hz > 0.0)) throw ContractViolation("compute_metrics: bad normalisation");
  std::vector<double> pu, su, total, silent, pu_slot, total_slot, eff, margin;
  for (const auto& r : runs) {
    pu.push_back(r.pu_bits);
    su.push_back(r.su_bits);
    total.push_back(r.total_bits());
    silent.push_back(r.silent_pu_bits);
    pu_slot.push_back(r.pu_bits / horizon);
    total_slot.push_back(r.total_bits() / horizon);
    eff.push_back(r.total_bits() / (horizon * slot_s * band_hz));
    margin.push_back(r.pu_bits - beta * r.silent_pu_bits);
  }
  RunMetrics m;
  m.pu_bits = summarize(pu);
  m.su_bits = summarize(su);
  m.total_bits = summarize(total);
  m.silent_pu_bits = summarize(silent);
  m.pu_per_slot = summarize(pu_slot);
  m.total_per_slot = summarize(total_slot);
  m.spectral_efficiency = summarize(eff);
  m.constraint_margin = summarize(margin);
  m.pu_ratio = m.silent_pu_bits.mean > 0.0 ? m.pu_bits.mean / m.silent_pu_bits.mean : 0.0;
  return m;
}

std::vector<RunRecord> run_many(const ScenarioConfig& cfg, const PlannedScheme& planned, int threads) {
  const int n = cfg.runs;
  std::vector<RunRecord> out(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int k = next++; k < n; k = next++) {
      try {
        const EpisodeOptions o = run_options(cfg, k);
        const auto e = planned.run(o);
        const auto s = planned.run_silent(o);
        out[static_cast<std::size_t>(k)] = {k, o.seed, e.pu_bits, e.su_bits, s.pu_bits};
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, n);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (int k = 0; k < n; ++k)
    if (errors[static_cast<std::size_t>(k)]) {
      try {
        std::rethrow_exception(errors[static_cast<std::size_t>(k)]);
      } catch (const NumericalError& e) {
        throw NumericalError("run " + std::to_string(k) + ": " + e.what());
      } catch (const ConfigError& e) {
        throw ConfigError("run " + std::to_string(k) + ": " + e.what());
      }
    }
  return out;
}

SweepTable run_sweep(const ScenarioConfig& cfg, const std::string& axis, const std::vector<double>& values,
                     const std::vector<Scheme>& schemes) {
  SweepTable table;
  table.axis = axis.empty() ? "none" : axis;
  const std::vector<double> points = axis.empty() || axis == "none" ? std::vector<double>{0.0} : values;
  for (double v : points) {
    ScenarioConfig point = cfg;
    if (!(axis.empty() || axis == "none")) {
      try {
        point = with_axis(cfg, axis, v);
      } catch (const ConfigError& e) {
        throw ConfigError("[" + table.axis + "=" + format(v) + "] " + e.what());
      }
    }
    for (Scheme s : schemes) {
      ResultRow row;
      row.value = v;
      row.scheme = s;
      try {
        const auto planned = plan_scheme(point, s);
        row.runs = run_many(point, *planned, point.threads);
      } catch (const ConfigError& e) {
        throw ConfigError(context(table.axis, v, s) + e.what());
      } catch (const NumericalError& e) {
        throw NumericalError(context(table.axis, v, s) + e.what());
      }
      row.metrics = compute_metrics(row.runs, point.horizon, point.network.slot_length_s,
                                    point.network.band.bandwidth_khz * 1e3, point.beta);
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

void write_results_csv(std::ostream& out, const SweepTable& table) {
  out << table.axis << ",scheme,n";
  for (const auto& m : kMetrics) out << ',' << m.name << "_mean," << m.name << "_se";
  out << ",pu_ratio\n";
  for (const auto& row : table.rows) {
    out << format(row.value) << ',' << scheme_name(row.scheme) << ',' << row.metrics.pu_bits.n;
    for (const auto& m : kMetrics) {
      const Statistic& s = row.metrics.*(m.field);
      out << ',' << format(s.mean) << ',' << format(s.se);
    }
    out << ',' << format(row.metrics.pu_ratio) << '\n';
  }
}

void write_long_csv(std::ostream& out, const SweepTable& table) {
  out << table.axis << ",scheme,metric,mean,se,n\n";
  for (const auto& row : table.rows)
    for (const auto& m : kMetrics) {
      const Statistic& s = row.metrics.*(m.field);
      out << format(row.value) << ',' << scheme_name(row.scheme) << ',' << m.name << ',' << format(s.mean) << ','
          << format(s.se) << ',' << s.n << '\n';
    }
}

void write_runs_csv(std::ostream& out, const SweepTable& table) {
  out << table.axis << ",scheme,run,seed,pu_bits,su_bits,total_bits,silent_pu_bits\n";
  for (const auto& row : table.rows)
    for (const auto& r : row.runs)
      out << format(row.value) << ',' << scheme_name(row.scheme) << ',' << r.run << ',' << r.seed << ','
          << format(r.pu_bits) << ',' << format(r.su_bits) << ',' << format(r.total_bits()) << ','
          << format(r.silent_pu_bits) << '\n';
}

SweepTable read_results_csv(std::istream& in) {
  SweepTable table;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("csv: missing header");
  const auto header = split(line);
  const std::size_t width = 3 + 2 * std::size(kMetrics) + 1;
  if (header.size() != width) throw ConfigError("csv: unexpected header");
  table.axis = header[0];
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != width) throw ConfigError("csv: row width mismatch");
    ResultRow row;
    row.value = parse_double(cells[0]);
    row.scheme = parse_scheme(cells[1]);
    const int n = static_cast<int>(parse_double(cells[2]));
    std::size_t c = 3;
    for (const auto& m : kMetrics) {
      Statistic& s = row.metrics.*(m.field);
      s.mean = parse_double(cells[c++]);
      s.se = parse_double(cells[c++]);
      s.n = n;
    }
    row.metrics.pu_ratio = parse_double(cells[c]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace uwcog::harness
