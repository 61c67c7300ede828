#pragma once

// Comparison schemes: C-TDM, interference alignment, C-FDM and DCTS-FDM, plus the
// sub-channel band plan used by the FDM variants and the all-silent reference run.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

#include "uwcog/channel.hpp"
#include "uwcog/episode.hpp"
#include "uwcog/netmodel.hpp"
#include "uwcog/planner_decentral.hpp"

namespace uwcog::baselines {

struct BandPlan {
  std::vector<channel::Band> channels;
  double guard_khz = 0.2;
  double bit_rate_bps = 3000.0;  // per sub-channel
  // channel index per hop; empty means hop j uses channel (j - 1) mod count
  std::vector<int> pu_assignment;
  std::vector<int> su_assignment;

  /// Three 1.2 kHz channels at 30.6, 32 and 33.4 kHz, 3 kbps each.
  static BandPlan three_channel();
  /// One channel covering `band` at `bit_rate_bps`: the TDM scenario.
  static BandPlan single(const channel::Band& band, double bit_rate_bps);

  int pu_channel(int hop) const;
  int su_channel(int hop) const;
  /// Throws ConfigError listing every problem: channels outside `total` or closer than the
  /// guard band, bad assignments, or a channel shared by three consecutive nodes of a chain.
  void validate(const channel::Band& total, int pu_hops, int su_hops) const;
};

/// Scenario variant with one sub-channel per link. Packets shrink to the largest whole
/// byte count that ends inside the slot at the channel rate.
net::NetworkSpec build_fdm_model(const net::NetworkSpec& spec, const BandPlan& plan);

/// Probability under omega that some neighbourhood PU hop transmits.
double occupancy(const decentral::LocalModel& model, const Eigen::VectorXd& omega);
/// Same, counting only PU hops on the SU hop's own channel.
double channel_occupancy(const decentral::LocalModel& model, const net::Network& net, const Eigen::VectorXd& omega);

constexpr double kOccupancyThreshold = 0.5;

/// X * Y with X ~ Bernoulli(1 - beta_bar) and Y = [occupancy <= 0.5].
int ctdm_decide(const decentral::LocalModel& model, const Eigen::VectorXd& omega, double beta_bar, std::mt19937_64& rng);
/// X * Z with Z = [channel occupancy <= 0.5].
int cfdm_decide(const decentral::LocalModel& model, const net::Network& net, const Eigen::VectorXd& omega,
                double beta_bar, std::mt19937_64& rng);

struct IaOptions {
  int frame_slots = 30;
  int overhead_slots = 1;  // SU slots lost to the schedule broadcast at each frame start
  double access_probability = 1.0 / 3.0;
};

/// True when SU hop `su_hop`'s packet reaches no receiver of the PU hops in `pu_schedule`.
bool ia_clear(const net::Network& net, int su_hop, std::uint32_t pu_schedule);
/// IA decision for slot t (1-based) given the broadcast PU schedule of that slot.
int ia_schedule(const net::Network& net, int su_hop, long t, std::uint32_t pu_schedule, const IaOptions& options,
                std::mt19937_64& rng);

/// Network and local models of a belief-threshold baseline.
struct LocalScheme {
  net::Network net;
  std::vector<decentral::LocalModel> models;
  double beta_bar = 1.0;
  int reuse = net::kReuseFactor;
};

LocalScheme plan_ctdm(const net::NetworkSpec& spec, double beta, double neighbour_range_slots = 1.0);
LocalScheme plan_cfdm(const net::NetworkSpec& spec, const BandPlan& plan, double beta,
                      double neighbour_range_slots = 1.0);
decentral::DctsScheme plan_dcts_fdm(const net::NetworkSpec& spec, const BandPlan& plan,
                                    decentral::DctsOptions options);

/// C-TDM honours periodic access (SU i only in slots t = i mod 3); C-FDM does not.
EpisodeResult run_ctdm(const LocalScheme& scheme, const EpisodeOptions& options);
EpisodeResult run_cfdm(const LocalScheme& scheme, const EpisodeOptions& options);
EpisodeResult run_ia(const net::Network& net, const IaOptions& ia, const EpisodeOptions& options);
EpisodeResult run_silent(const net::Network& net, const EpisodeOptions& options);

}  // namespace uwcog::baselines
