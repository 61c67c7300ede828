#pragma once

// Cognitive multi-hop network model: topology, link budgets, interference
// overlap from propagation delays, the joint PU/SU Markov chain and the
// ground-truth slot simulator.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include "uwcog/channel.hpp"

namespace uwcog::net {

using Vec3 = Eigen::Vector3d;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Bit set over links: bit (hop-1) for PU hops, bit (N_P + hop-1) for SU hops.
using LinkMask = std::uint32_t;
/// Bit set over SU hops, bit (hop-1).
using Decision = std::uint32_t;

/// Spatial reuse period of the PU pipeline and of DCTS eligibility.
inline constexpr int kReuseFactor = 3;

/// Phase of a 1-based hop in the reuse cycle.
constexpr int hop_phase(int hop) { return hop % kReuseFactor; }
/// Phase of a slot index (slot 1 is phase 1; the warm-up slot -1 is phase 2).
constexpr int slot_phase(long slot) { return static_cast<int>(((slot % kReuseFactor) + kReuseFactor) % kReuseFactor); }

struct Topology {
  std::vector<Vec3> pu_nodes;  // N_P + 1 positions, m
  std::vector<Vec3> su_nodes;  // N_S + 1 positions, m

  int pu_hops() const { return static_cast<int>(pu_nodes.size()) - 1; }
  int su_hops() const { return static_cast<int>(su_nodes.size()) - 1; }
  void validate() const;

  /// PU chain along x, SU chain along y shifted by `su_offset_m` in x, both centred at the origin.
  static Topology crossing(double end_to_end_m, int pu_hops, int su_hops, double su_offset_m, double node_depth_m);
};

struct TrafficModel {
  double alpha1 = 0.05;  // off -> on
  double alpha2 = 0.2;   // on -> on

  /// Long-run fraction of "on" source opportunities, alpha1 / (1 + alpha1 - alpha2).
  double stationary_on() const { return alpha1 == 0.0 ? 0.0 : alpha1 / (1.0 + alpha1 - alpha2); }
  void validate() const;
};

struct MultipathSettings {
  double water_depth_m = 100.0;
  double node_depth_m = 50.0;
  double surface_reflection = -1.0;
  double bottom_reflection = 0.5;
  double length_deviation_std = 5.0;
  int micropath_count = 8;
  double micropath_delay_spread = 5e-4;
  std::size_t fit_samples = 10000;
  std::uint64_t fit_seed = 7;

  channel::MultipathGeometry geometry(double range_m) const;
};

/// Frequency slot and rate of one link. Links on different channels do not interfere.
struct LinkChannel {
  int channel = 0;
  channel::Band band;
  double bit_rate_bps = 10000.0;
};

struct NetworkSpec {
  Topology topology;
  channel::AcousticEnvironment env;
  MultipathSettings multipath;
  channel::Band band;
  double bit_rate_bps = 10000.0;
  double tx_power_db = 130.0;  // dB re uPa at 1 m
  double slot_length_s = 3.0;
  TrafficModel traffic;
  double pu_packet_bits = 12000.0;
  std::vector<double> su_packet_bits;  // one per SU hop; empty means pu_packet_bits everywhere
  double min_su_packet_bits = 512.0;
  std::vector<LinkChannel> pu_channels;  // per-hop override, empty for the shared band
  std::vector<LinkChannel> su_channels;
  std::optional<double> sensing_sigma;   // sigma_N; per-sensor 10 dB detection SNR if empty
  double sensing_range_slots = 1.0;
  std::size_t state_cap = std::size_t{1} << 16;

  double su_bits(int hop) const;
  void validate() const;
};

enum class LinkKind : std::uint8_t { primary, secondary };

struct Link {
  LinkKind kind = LinkKind::primary;
  int hop = 1;       // 1-based within its chain
  int tx_node = 0;   // global node ids: PU nodes first, then SU nodes
  int rx_node = 0;
  Vec3 tx = Vec3::Zero();
  Vec3 rx = Vec3::Zero();
  LinkChannel channel;
  double packet_bits = 0.0;
  channel::LinkGainModel gain;
  double noise_power = 0.0;  // in-band, uPa^2

  double length() const { return (tx - rx).norm(); }
  double duration_s() const { return packet_bits / channel.bit_rate_bps; }
};

/// Interference of one transmitter onto one receiver's packet.
struct OverlapEntry {
  int interferer = -1;
  int victim = -1;
  bool same_channel = true;
  double arrival_offset_s = 0.0;  // interferer arrival minus desired arrival at the victim receiver
  double overlap_start_s = 0.0;   // absolute, from slot start
  double overlap_end_s = 0.0;
  std::int64_t first_bit = 0;     // 1-based; 0/0 when nothing overlaps
  std::int64_t last_bit = 0;
  double power = 0.0;             // received interference power, uPa^2

  bool empty() const { return first_bit == 0 || last_bit < first_bit; }
};

class OverlapTable {
public:
  OverlapTable() = default;
  OverlapTable(int links, std::vector<OverlapEntry> entries) : links_(links), entries_(std::move(entries)) {}

  int link_count() const { return links_; }
  const OverlapEntry& at(int interferer, int victim) const {
    return entries_[static_cast<std::size_t>(interferer * links_ + victim)];
  }
  const std::vector<OverlapEntry>& entries() const { return entries_; }

private:
  int links_ = 0;
  std::vector<OverlapEntry> entries_;
};

/// Built network: links with fitted gains, overlap table and packet-loss cache.
/// Immutable after construction and safe to share across threads.
class Network {
public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  int pu_hops() const { return spec_.topology.pu_hops(); }
  int su_hops() const { return spec_.topology.su_hops(); }
  int link_count() const { return static_cast<int>(links_.size()); }
  const std::vector<Link>& links() const { return links_; }
  const Link& link(int index) const { return links_[static_cast<std::size_t>(index)]; }
  int pu_link(int hop) const { return hop - 1; }
  int su_link(int hop) const { return pu_hops() + hop - 1; }
  double tx_power() const { return tx_power_; }
  const OverlapTable& overlap() const { return overlap_; }

  /// Piecewise-constant per-bit error rates of `link` when the links in `active` transmit.
  std::vector<channel::BerSegment> ber_profile(int link, LinkMask active) const;
  /// Packet loss probability of an active link; 1 when its receiver is itself transmitting.
  double loss(int link, LinkMask active) const;
  bool half_duplex_blocked(int link, LinkMask active) const;

  /// Sensing model: y_i = c_i . s + d_i . delta + n, n ~ N(0, sigma_i^2).
  const Eigen::MatrixXd& sensing_pu() const { return sensing_pu_; }  // N_S x N_P
  const Eigen::MatrixXd& sensing_su() const { return sensing_su_; }  // N_S x N_S
  const Eigen::VectorXd& sensing_sigma() const { return sensing_sigma_; }

  double propagation_delay(const Vec3& a, const Vec3& b) const { return (a - b).norm() / spec_.env.sound_speed; }
  double max_one_hop_delay() const;

  /// Same network with one SU hop's packet size replaced.
  Network with_su_packet_bits(int hop, double bits) const;

private:
  void build_links();
  void build_overlap();
  void build_sensing();
  void build_loss_cache();
  double compute_loss(int link, LinkMask active) const;
  double interferer_gain(double distance_m, const channel::Band& band) const;

  NetworkSpec spec_;
  double tx_power_ = 0.0;
  std::vector<Link> links_;
  OverlapTable overlap_;
  Eigen::MatrixXd sensing_pu_, sensing_su_;
  Eigen::VectorXd sensing_sigma_;
  std::vector<double> loss_cache_;  // link * 2^L + mask; empty when L is too large to tabulate
};

/// Arrival windows as seen at the victim's receiver; exposed for audits.
struct ArrivalWindow {
  double start_s;
  double end_s;
};
ArrivalWindow desired_window(const Network& net, int victim);
ArrivalWindow interferer_window(const Network& net, int interferer, int victim);

/// Largest SU packet sizes (bits, whole bytes) that keep SU hop `su_hop` clear of each PU
/// hop, plus the maximum size.
std::vector<double> critical_sizes(const Network& net, int su_hop);

// ---------------------------------------------------------------------------
// Joint Markov chain

struct SystemState {
  int phase = 0;               // slot index mod 3
  std::uint32_t pu = 0;        // bit (hop-1): PU hop transmitting this slot
  bool source_on = false;      // PU source arrival chain
  std::uint32_t buffers = 1;   // bit (hop-1): SU hop holds a packet; hop 1 is backlogged

  friend bool operator==(const SystemState&, const SystemState&) = default;
};

inline Decision effective_decision(const SystemState& s, Decision d) { return d & s.buffers; }

class StateSpace {
public:
  StateSpace(int pu_hops, int su_hops);

  int size() const { return static_cast<int>(states_.size()); }
  const SystemState& at(int index) const { return states_[static_cast<std::size_t>(index)]; }
  int index(const SystemState& s) const;
  int pu_hops() const { return pu_hops_; }
  int su_hops() const { return su_hops_; }
  /// Known state of the warm-up slot -1: all idle, source off, only the backlogged buffer full.
  SystemState warmup_state() const { return SystemState{slot_phase(-1), 0u, false, 1u}; }

private:
  static std::uint64_t key(const SystemState& s) {
    return (static_cast<std::uint64_t>(s.phase) << 62) | (static_cast<std::uint64_t>(s.source_on) << 61) |
           (static_cast<std::uint64_t>(s.pu) << 30) | s.buffers;
  }
  int pu_hops_, su_hops_;
  std::vector<SystemState> states_;
  std::unordered_map<std::uint64_t, int> lookup_;
};

/// One branch of the next-slot distribution.
struct Outcome {
  SystemState next;
  double probability;
  double pu_bits;  // delivered end-to-end
  double su_bits;
};

/// Exact next-slot distribution for a state and (already masked) decision.
std::vector<Outcome> slot_outcomes(const Network& net, const SystemState& s, Decision effective);

class TransitionModel {
public:
  explicit TransitionModel(const Network& net);

  const StateSpace& states() const { return space_; }
  int decision_count() const { return static_cast<int>(matrices_.size()); }
  const SparseMatrix& matrix(Decision d) const { return matrices_[d]; }
  const Eigen::VectorXd& throughput(Decision d) const { return g_[d]; }
  const Eigen::VectorXd& pu_throughput(Decision d) const { return g_pu_[d]; }
  const Eigen::VectorXd& su_throughput(Decision d) const { return g_su_[d]; }
  /// Distribution of the state in slot 1: the warm-up state advanced by two silent slots.
  Eigen::VectorXd initial_distribution() const;

  /// CSV rows: state,decision,next_state,probability
  void write_csv(std::ostream& out) const;

private:
  StateSpace space_;
  std::vector<SparseMatrix> matrices_;
  std::vector<Eigen::VectorXd> g_, g_pu_, g_su_;
};

struct SlotResult {
  SystemState next;
  double pu_bits = 0.0;
  double su_bits = 0.0;
};

/// Samples one slot of ground truth. `decision` must respect the buffers.
SlotResult simulate_slot(const Network& net, const SystemState& s, Decision decision, std::mt19937_64& rng);

/// Noisy energy measurement of one SU sensor.
double observe(const Network& net, const SystemState& s, Decision effective, int su_hop, std::mt19937_64& rng);
/// All N_S sensors.
Eigen::VectorXd observe_all(const Network& net, const SystemState& s, Decision effective, std::mt19937_64& rng);
/// Noise-free sensor means c_i . s + d_i . delta.
Eigen::VectorXd sensing_mean(const Network& net, const SystemState& s, Decision effective);

}  // namespace uwcog::net
