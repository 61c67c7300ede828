#include "uwcog/baselines.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "uwcog/errors.hpp"

namespace uwcog::baselines {

namespace {

constexpr double kKhzEps = 1e-9;

double bytes_floor(double bits) { return std::floor(bits / 8.0 + 1e-9) * 8.0; }

int assigned(const std::vector<int>& table, int hop, int count) {
  if (table.empty()) return (hop - 1) % count;
  return table[static_cast<std::size_t>(hop - 1)];
}

bool bernoulli(double p, std::mt19937_64& rng) { return uniform01(rng) < p; }

}  // namespace

BandPlan BandPlan::three_channel() {
  BandPlan p;
  p.channels = {{30.6, 1.2}, {32.0, 1.2}, {33.4, 1.2}};
  p.guard_khz = 0.2;
  p.bit_rate_bps = 3000.0;
  return p;
}

BandPlan BandPlan::single(const channel::Band& band, double bit_rate_bps) {
  BandPlan p;
  p.channels = {band};
  p.guard_khz = 0.0;
  p.bit_rate_bps = bit_rate_bps;
  return p;
}

int BandPlan::pu_channel(int hop) const { return assigned(pu_assignment, hop, static_cast<int>(channels.size())); }
int BandPlan::su_channel(int hop) const { return assigned(su_assignment, hop, static_cast<int>(channels.size())); }

void BandPlan::validate(const channel::Band& total, int pu_hops, int su_hops) const {
  std::vector<std::string> issues;
  const int n = static_cast<int>(channels.size());
  if (n < 1) issues.emplace_back("band_plan.channels: at least one channel is required");
  if (!(bit_rate_bps > 0.0)) issues.emplace_back("band_plan.bit_rate_bps must be positive");
  if (!(guard_khz >= 0.0)) issues.emplace_back("band_plan.guard_khz must be non-negative");
  for (int k = 0; k < n; ++k) {
    const auto& c = channels[static_cast<std::size_t>(k)];
    std::ostringstream at;
    at << "band_plan.channels[" << k << "]";
    if (!(c.bandwidth_khz > 0.0)) issues.push_back(at.str() + ": bandwidth must be positive");
    if (c.low_khz() < total.low_khz() - kKhzEps || c.high_khz() > total.high_khz() + kKhzEps)
      issues.push_back(at.str() + ": outside the total band");
  }
  std::vector<channel::Band> sorted = channels;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.center_khz < b.center_khz; });
  for (std::size_t k = 1; k < sorted.size(); ++k)
    if (sorted[k - 1].high_khz() + guard_khz > sorted[k].low_khz() + kKhzEps)
      issues.emplace_back("band_plan.channels: neighbouring channels closer than the guard band");

  auto check_chain = [&](const std::vector<int>& table, int hops, const char* name) {
    if (!table.empty() && static_cast<int>(table.size()) != hops) {
      issues.push_back(std::string("band_plan.") + name + ": one channel per hop");
      return;
    }
    for (int j = 1; j <= hops; ++j) {
      const int c = assigned(table, j, std::max(n, 1));
      if (c < 0 || c >= n) issues.push_back(std::string("band_plan.") + name + ": channel index out of range");
    }
    // nodes j-1, j, j+1 transmit on hops j, j+1, j+2; a single channel is the TDM scenario
    if (n < 2) return;
    for (int j = 1; j <= hops; ++j)
      for (int k = j + 1; k <= std::min(hops, j + 2); ++k)
        if (assigned(table, j, n) == assigned(table, k, n)) {
          std::ostringstream os;
          os << "band_plan." << name << ": hops " << j << " and " << k << " share a channel within three consecutive nodes";
          issues.push_back(os.str());
        }
  };
  check_chain(pu_assignment, pu_hops, "pu_assignment");
  check_chain(su_assignment, su_hops, "su_assignment");
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

net::NetworkSpec build_fdm_model(const net::NetworkSpec& spec, const BandPlan& plan) {
  const int np = spec.topology.pu_hops(), ns = spec.topology.su_hops();
  plan.validate(spec.band, np, ns);
  net::NetworkSpec out = spec;
  const auto& pu = spec.topology.pu_nodes;
  const auto& su = spec.topology.su_nodes;
  auto fit = [&](const net::Vec3& a, const net::Vec3& b) {
    return bytes_floor((spec.slot_length_s - (a - b).norm() / spec.env.sound_speed) * plan.bit_rate_bps);
  };
  out.pu_channels.clear();
  out.su_channels.clear();
  double pu_bits = spec.pu_packet_bits;
  for (int j = 1; j <= np; ++j) {
    const int c = plan.pu_channel(j);
    out.pu_channels.push_back({c, plan.channels[static_cast<std::size_t>(c)], plan.bit_rate_bps});
    pu_bits = std::min(pu_bits, fit(pu[static_cast<std::size_t>(j - 1)], pu[static_cast<std::size_t>(j)]));
  }
  out.su_packet_bits.assign(static_cast<std::size_t>(ns), 0.0);
  double smallest = pu_bits;
  for (int i = 1; i <= ns; ++i) {
    const int c = plan.su_channel(i);
    out.su_channels.push_back({c, plan.channels[static_cast<std::size_t>(c)], plan.bit_rate_bps});
    const double bits = std::min(spec.su_bits(i), fit(su[static_cast<std::size_t>(i - 1)], su[static_cast<std::size_t>(i)]));
    out.su_packet_bits[static_cast<std::size_t>(i - 1)] = bits;
    smallest = std::min(smallest, bits);
  }
  if (!(pu_bits >= 8.0)) throw ConfigError("band_plan: no PU packet fits the slot at the channel rate");
  out.pu_packet_bits = pu_bits;
  out.min_su_packet_bits = std::min(spec.min_su_packet_bits, smallest);
  out.band = spec.band;
  out.bit_rate_bps = plan.bit_rate_bps;
  return out;
}

double occupancy(const decentral::LocalModel& model, const Eigen::VectorXd& omega) {
  if (omega.size() != model.size()) throw ContractViolation("occupancy: belief size mismatch");
  double p = 0.0;
  for (int k = 0; k < model.size(); ++k)
    if (model.state(k).pu != 0u) p += omega(k);
  return p;
}

double channel_occupancy(const decentral::LocalModel& model, const net::Network& net, const Eigen::VectorXd& omega) {
  if (omega.size() != model.size()) throw ContractViolation("channel_occupancy: belief size mismatch");
  const int own = net.link(net.su_link(model.su_hop())).channel.channel;
  std::uint32_t same = 0;
  const auto& hops = model.neighbours();
  for (std::size_t h = 0; h < hops.size(); ++h)
    if (net.link(net.pu_link(hops[h])).channel.channel == own) same |= 1u << h;
  double p = 0.0;
  for (int k = 0; k < model.size(); ++k)
    if (model.state(k).pu & same) p += omega(k);
  return p;
}

int ctdm_decide(const decentral::LocalModel& model, const Eigen::VectorXd& omega, double beta_bar, std::mt19937_64& rng) {
  const bool x = bernoulli(1.0 - beta_bar, rng);
  return x && occupancy(model, omega) <= kOccupancyThreshold ? 1 : 0;
}

int cfdm_decide(const decentral::LocalModel& model, const net::Network& net, const Eigen::VectorXd& omega,
                double beta_bar, std::mt19937_64& rng) {
  const bool x = bernoulli(1.0 - beta_bar, rng);
  return x && channel_occupancy(model, net, omega) <= kOccupancyThreshold ? 1 : 0;
}

bool ia_clear(const net::Network& net, int su_hop, std::uint32_t pu_schedule) {
  if (su_hop < 1 || su_hop > net.su_hops()) throw ContractViolation("ia_clear: SU hop out of range");
  const int su = net.su_link(su_hop);
  for (int j = 1; j <= net.pu_hops(); ++j)
    if (pu_schedule >> (j - 1) & 1u)
      if (!net.overlap().at(su, net.pu_link(j)).empty()) return false;
  return true;
}

int ia_schedule(const net::Network& net, int su_hop, long t, std::uint32_t pu_schedule, const IaOptions& options,
                std::mt19937_64& rng) {
  if (options.frame_slots < 1 || options.overhead_slots < 0 || options.overhead_slots >= options.frame_slots)
    throw ConfigError("ia: need 0 <= overhead_slots < frame_slots");
  if (!(options.access_probability >= 0.0 && options.access_probability <= 1.0))
    throw ConfigError("ia: access probability must lie in [0, 1]");
  // the access draw is made every slot so the policy stream stays aligned across frames
  const bool access = bernoulli(options.access_probability, rng);
  if ((t - 1) % options.frame_slots < options.overhead_slots) return 0;
  return access && ia_clear(net, su_hop, pu_schedule) ? 1 : 0;
}

LocalScheme plan_ctdm(const net::NetworkSpec& spec, double beta, double neighbour_range_slots) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  LocalScheme s{net::Network(spec), {}, 1.0, net::kReuseFactor};
  s.beta_bar = decentral::local_beta(beta, s.net.su_hops());
  for (int i = 1; i <= s.net.su_hops(); ++i) s.models.emplace_back(s.net, i, neighbour_range_slots);
  return s;
}

LocalScheme plan_cfdm(const net::NetworkSpec& spec, const BandPlan& plan, double beta, double neighbour_range_slots) {
  LocalScheme s = plan_ctdm(build_fdm_model(spec, plan), beta, neighbour_range_slots);
  s.reuse = 0;
  return s;
}

decentral::DctsScheme plan_dcts_fdm(const net::NetworkSpec& spec, const BandPlan& plan, decentral::DctsOptions options) {
  options.reuse = 0;
  return decentral::plan_dcts(build_fdm_model(spec, plan), options);
}

EpisodeResult run_ctdm(const LocalScheme& scheme, const EpisodeOptions& options) {
  const auto& models = scheme.models;
  const double beta_bar = scheme.beta_bar;
  const int reuse = scheme.reuse;
  return decentral::run_local_episode(
      scheme.net, models,
      [&models, beta_bar, reuse](int i, int t, const Eigen::VectorXd& omega, std::mt19937_64& rng) {
        const int d = ctdm_decide(models[static_cast<std::size_t>(i - 1)], omega, beta_bar, rng);
        return reuse == 0 || t % reuse == i % reuse ? d : 0;
      },
      options);
}

EpisodeResult run_cfdm(const LocalScheme& scheme, const EpisodeOptions& options) {
  const auto& models = scheme.models;
  const auto& net = scheme.net;
  const double beta_bar = scheme.beta_bar;
  return decentral::run_local_episode(
      net, models,
      [&models, &net, beta_bar](int i, int, const Eigen::VectorXd& omega, std::mt19937_64& rng) {
        return cfdm_decide(models[static_cast<std::size_t>(i - 1)], net, omega, beta_bar, rng);
      },
      options);
}

EpisodeResult run_ia(const net::Network& net, const IaOptions& ia, const EpisodeOptions& options) {
  EpisodeStreams streams(options.seed, options.run);
  const net::StateSpace space(net.pu_hops(), net.su_hops());
  net::SystemState s = space.warmup_state();
  for (int k = 0; k < 2; ++k) s = net::simulate_slot(net, s, 0, streams.environment).next;
  EpisodeResult out;
  for (int t = 1; t <= options.horizon; ++t) {
    net::Decision d = 0;
    for (int i = 1; i <= net.su_hops(); ++i)
      if (ia_schedule(net, i, t, s.pu, ia, streams.policy)) d |= 1u << (i - 1);
    const net::Decision eff = net::effective_decision(s, d);
    const auto r = net::simulate_slot(net, s, eff, streams.environment);
    out.pu_bits += r.pu_bits;
    out.su_bits += r.su_bits;
    out.su_attempts += std::popcount(eff);
    ++out.slots;
    if (options.record_trace) out.trace.push_back({t, s.pu, d, eff, r.pu_bits, r.su_bits});
    s = r.next;
  }
  return out;
}

EpisodeResult run_silent(const net::Network& net, const EpisodeOptions& options) {
  EpisodeStreams streams(options.seed, options.run);
  const net::StateSpace space(net.pu_hops(), net.su_hops());
  net::SystemState s = space.warmup_state();
  for (int k = 0; k < 2; ++k) s = net::simulate_slot(net, s, 0, streams.environment).next;
  EpisodeResult out;
  for (int t = 1; t <= options.horizon; ++t) {
    const auto r = net::simulate_slot(net, s, 0, streams.environment);
    out.pu_bits += r.pu_bits;
    ++out.slots;
    if (options.record_trace) out.trace.push_back({t, s.pu, 0u, 0u, r.pu_bits, 0.0});
    s = r.next;
  }
  return out;
}

}  // namespace uwcog::baselines
