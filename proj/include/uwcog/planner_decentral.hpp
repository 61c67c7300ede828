#pragma once

// Decentralised scheduling (DCTS): per-SU local chains over nearby PU hops, value
// iteration with one-slot-delayed beliefs and periodic access, threshold decisions,
// and packet-size selection by a single-constraint linear program.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

#include "uwcog/episode.hpp"
#include "uwcog/netmodel.hpp"

namespace uwcog::decentral {

struct LocalState {
  int phase = 0;             // global slot phase
  std::uint32_t pu = 0;      // bit k: k-th hop of the neighbourhood is transmitting
  bool source_on = false;    // arrival chain feeding the first neighbourhood hop

  friend bool operator==(const LocalState&, const LocalState&) = default;
};

/// Local view of one SU hop: the PU hops within one slot of propagation (C_i), modelled as a
/// pipeline fed by the source-level arrival chain at its first hop.
class LocalModel {
public:
  /// `neighbour_range_slots` scales the one-slot radius. A PU hop belongs to C_i when its
  /// transmitter is within range of the SU receiver or its receiver within range of the SU transmitter.
  LocalModel(const net::Network& net, int su_hop, double neighbour_range_slots = 1.0);

  int su_hop() const { return su_hop_; }
  /// PU hops in C_i, contiguous and ascending; empty when no PU is near.
  const std::vector<int>& neighbours() const { return hops_; }
  /// End receiver index r: the last hop of C_i, 0 when empty.
  int end_hop() const { return hops_.empty() ? 0 : hops_.back(); }

  int size() const { return static_cast<int>(states_.size()); }
  const LocalState& state(int k) const { return states_[static_cast<std::size_t>(k)]; }
  int index(const LocalState& s) const;
  /// Local state of the warm-up slot -1.
  int warmup_index() const;

  const Eigen::MatrixXd& matrix(int delta) const { return p_[delta]; }
  const Eigen::VectorXd& throughput(int delta) const { return g_[delta]; }
  const Eigen::VectorXd& pu_throughput(int delta) const { return gp_[delta]; }
  const Eigen::VectorXd& su_throughput(int delta) const { return gs_[delta]; }
  /// PU packet loss of neighbourhood hop `hop` in local state k.
  double pu_loss(int k, int hop, int delta) const;

  /// Sensor mean per local state (no SU term: the sensor does not hear itself) and noise level.
  const Eigen::VectorXd& sensing_mean() const { return mean_; }
  double sensing_sigma() const { return sigma_; }
  double su_packet_bits() const { return su_bits_; }

private:
  int su_hop_;
  double su_bits_;
  std::vector<int> hops_;
  std::vector<LocalState> states_;
  Eigen::MatrixXd p_[2];
  Eigen::VectorXd g_[2], gp_[2], gs_[2];
  Eigen::VectorXd mean_;
  double sigma_ = 1.0;
  std::vector<double> loss_;  // (k * hops + h) * 2 + delta
};

/// Bayes step with the SU's scalar measurement of slot t: predict the slot-(t-1) belief
/// through P(transition), then weight by the Gaussian likelihood of y.
Eigen::VectorXd belief_update_local(const LocalModel& model, const Eigen::VectorXd& belief, int transition, double y);

/// Stationary law of a row-stochastic matrix reached from `start`, by power iteration on
/// the lazy chain (I + P) / 2, which shares its fixed points and is aperiodic.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p, const Eigen::VectorXd& start);

struct LocalPlanOptions {
  int horizon = 300;
  double beta_bar = 0.8;
  int reuse = net::kReuseFactor;  // 0 disables periodic access; otherwise must equal kReuseFactor
};

/// Both sides of the two threshold tests for transmitting in slot t.
struct ThresholdSides {
  double gain = 0.0;         // omega . (g(1) - g(0))
  double loss = 0.0;         // sum_s omega(s) [V_{t+1}(s, 0) - V_{t+1}(s, 1)]
  double pu_value = 0.0;     // omega . g_P(1) + sum_s omega(s) V_{P,t+1}(s, 1)
  double pu_limit = 0.0;     // beta_bar * omega . h_t
  double silent_value = 0.0; // omega . g(0) + sum_s omega(s) V_{t+1}(s, 0)
};

/// Value iteration over basis beliefs v(s, a) = e_s P(a), s the local state one slot back.
class LocalPlanTable {
public:
  LocalPlanTable(const LocalModel& model, const LocalPlanOptions& options);

  int horizon() const { return horizon_; }
  double beta_bar() const { return beta_bar_; }
  int reuse() const { return reuse_; }
  int su_hop() const { return su_hop_; }
  int state_count() const { return states_; }
  int basis_index(int state, int a) const { return state * 2 + a; }
  bool eligible(int t) const;

  double value(int t, int basis) const { return value_[at(t, basis)]; }
  double pu_value(int t, int basis) const { return pu_value_[at(t, basis)]; }
  int decision(int t, int basis) const { return decision_[at(t, basis)]; }
  bool transmit_feasible(int t, int basis) const { return feasible_[at(t, basis)] != 0; }
  double baseline(int t, int basis) const { return baseline_[at(t, basis)]; }
  const Eigen::VectorXd& silent_reward_to_go(int t) const { return h_[static_cast<std::size_t>(t)]; }

  /// Threshold quantities for a belief over the current slot's local state.
  ThresholdSides sides(int t, const Eigen::VectorXd& omega) const;

  /// CSV rows: slot,basis,state,decision_a,value,pu_value,decision
  void write_csv(std::ostream& out) const;

private:
  std::size_t at(int t, int basis) const;
  double next_value(int t, int s, int c) const;
  double next_pu_value(int t, int s, int c) const;

  int horizon_, states_, reuse_, su_hop_;
  double beta_bar_;
  Eigen::VectorXd g_[2], gp_[2];
  std::vector<Eigen::VectorXd> h_;
  std::vector<double> value_, pu_value_, baseline_;
  std::vector<int> decision_;
  std::vector<std::uint8_t> feasible_;
};

/// 1 when slot t is eligible, transmitting meets the local PU constraint and strictly
/// improves on silence; ties go to silence.
int decide_threshold(const LocalPlanTable& plan, int t, const Eigen::VectorXd& omega);

double local_beta(double beta, int su_hops);

/// max sum_k q_k gain_k s.t. sum_k q_k cost_k <= budget, q in [0,1]^n, q_k = 0 where fixed.
struct LpSolution {
  std::vector<double> q;
  double objective = 0.0;
};
LpSolution solve_packet_lp(const std::vector<double>& gain, const std::vector<double>& cost, double budget,
                           const std::vector<bool>& fixed_zero = {});

struct PacketSizePlan {
  int su_hop = 0;
  std::vector<double> candidates;
  std::vector<double> objectives;  // per candidate
  double chosen_bits = 0.0;
  std::vector<double> q;           // per previous local state
  double objective = 0.0;
};

/// Evaluates the steady-state LP at every critical size and keeps the best.
PacketSizePlan optimize_packet_size(const net::Network& net, int su_hop, double beta, int reuse = net::kReuseFactor,
                                    double neighbour_range_slots = 1.0);
/// The LP at one packet size.
LpSolution packet_lp(const LocalModel& model, double beta, int reuse);

struct DctsOptions {
  int horizon = 300;
  double beta = 0.8;
  int reuse = net::kReuseFactor;
  bool optimize_packets = true;
  double neighbour_range_slots = 1.0;
};

/// Planned DCTS scheme: the network with chosen SU packet sizes plus one local plan per SU.
struct DctsScheme {
  net::Network net;
  std::vector<LocalModel> models;
  std::vector<LocalPlanTable> plans;
  std::vector<PacketSizePlan> packets;  // empty when sizes were not optimised
};

DctsScheme plan_dcts(const net::NetworkSpec& spec, const DctsOptions& options);

/// Per-slot decision of one SU from its predicted local belief; the stream is the run's policy stream.
using LocalRule = std::function<int(int su_hop, int t, const Eigen::VectorXd& omega, std::mt19937_64& rng)>;

/// Each SU predicts its local belief, applies `rule`, senses, and updates with its own
/// measurement; ground truth advances jointly.
EpisodeResult run_local_episode(const net::Network& net, const std::vector<LocalModel>& models, const LocalRule& rule,
                                const EpisodeOptions& options);

/// Algorithm 2: run_local_episode with the threshold rule of each SU's plan.
EpisodeResult run_episode(const DctsScheme& scheme, const EpisodeOptions& options);

}  // namespace uwcog::decentral
