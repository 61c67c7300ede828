#pragma once

// Experiment orchestration: plan each scheme once, run seeded episodes in parallel,
// pair them with silent runs under the same seeds, aggregate and export CSV.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "uwcog/config.hpp"
#include "uwcog/episode.hpp"

namespace uwcog::harness {

/// A scheme planned for one scenario, ready to run episodes. Immutable and thread-safe.
class PlannedScheme {
public:
  virtual ~PlannedScheme() = default;
  virtual Scheme scheme() const = 0;
  virtual EpisodeResult run(const EpisodeOptions& options) const = 0;
  /// Same-seed run with every SU silent on this scheme's network variant.
  virtual EpisodeResult run_silent(const EpisodeOptions& options) const = 0;
};

std::unique_ptr<PlannedScheme> plan_scheme(const ScenarioConfig& cfg, Scheme scheme);

/// Per-run options: seed = base_seed + run index, stream index 0.
EpisodeOptions run_options(const ScenarioConfig& cfg, int run_index);

struct RunRecord {
  int run = 0;
  std::uint64_t seed = 0;
  double pu_bits = 0.0;
  double su_bits = 0.0;
  double silent_pu_bits = 0.0;
  double total_bits() const { return pu_bits + su_bits; }
};

struct Statistic {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean; 0 for a single run
  int n = 0;
};
Statistic summarize(const std::vector<double>& xs);

struct RunMetrics {
  Statistic pu_bits, su_bits, total_bits, silent_pu_bits;
  Statistic pu_per_slot, total_per_slot;
  Statistic spectral_efficiency;  // bits/s/Hz over the full band
  Statistic constraint_margin;    // pu - beta * silent, paired per run
  double pu_ratio = 0.0;          // mean pu / mean silent pu
};

/// Throws ContractViolation on an empty run set.
RunMetrics compute_metrics(const std::vector<RunRecord>& runs, int horizon, double slot_s, double band_hz, double beta);

struct ResultRow {
  double value = 0.0;  // axis value
  Scheme scheme = Scheme::silent;
  RunMetrics metrics;
  std::vector<RunRecord> runs;
};

struct SweepTable {
  std::string axis;  // "none" for single runs
  std::vector<ResultRow> rows;
};

/// Runs `cfg.runs` episodes of one planned scheme on `threads` workers (0: hardware).
std::vector<RunRecord> run_many(const ScenarioConfig& cfg, const PlannedScheme& planned, int threads);

/// For each value and scheme: plan once, run the seeded episodes, aggregate. Deterministic
/// for any thread count.
SweepTable run_sweep(const ScenarioConfig& cfg, const std::string& axis, const std::vector<double>& values,
                     const std::vector<Scheme>& schemes);

/// Wide CSV: one row per (axis value, scheme) with mean, se and n of every metric.
void write_results_csv(std::ostream& out, const SweepTable& table);
/// Long CSV: axis value, scheme, metric, mean, se, n.
void write_long_csv(std::ostream& out, const SweepTable& table);
/// Per-run CSV.
void write_runs_csv(std::ostream& out, const SweepTable& table);
/// Parses write_results_csv output; runs are not restored.
SweepTable read_results_csv(std::istream& in);

}  // namespace uwcog::harness
