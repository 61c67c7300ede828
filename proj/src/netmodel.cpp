#include "uwcog/netmodel.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>

#include "uwcog/errors.hpp"

namespace uwcog::net {

namespace {

constexpr double kTimeEps = 1e-9;
constexpr int kMaxTabulatedLinks = 12;

bool finite_vec(const Vec3& v) { return v.allFinite(); }

// Fitted log-normal gains are reused across networks that share a link geometry.
struct FitKey {
  long range_cm;
  double center, width, kappa, a0, shipping, wind, c;
  double depth, node_depth, surf, bot, len_std, delay_spread;
  int micro;
  std::size_t samples;
  std::uint64_t seed;
  auto tie() const {
    return std::tie(range_cm, center, width, kappa, a0, shipping, wind, c, depth, node_depth, surf, bot, len_std,
                    delay_spread, micro, samples, seed);
  }
  bool operator<(const FitKey& o) const { return tie() < o.tie(); }
};

std::mutex g_fit_mutex;
std::map<FitKey, channel::LinkGainModel> g_fit_cache;

channel::LinkGainModel cached_fit(double range, const channel::Band& band, const channel::AcousticEnvironment& env,
                                  const MultipathSettings& mp) {
  const FitKey key{std::lround(range * 100.0), band.center_khz, band.bandwidth_khz, env.spreading_factor,
                   env.normalizing_constant, env.shipping_activity, env.wind_speed, env.sound_speed,
                   mp.water_depth_m, mp.node_depth_m, mp.surface_reflection, mp.bottom_reflection,
                   mp.length_deviation_std, mp.micropath_delay_spread, mp.micropath_count, mp.fit_samples,
                   mp.fit_seed};
  {
    std::lock_guard lock(g_fit_mutex);
    if (auto it = g_fit_cache.find(key); it != g_fit_cache.end()) return it->second;
  }
  std::mt19937_64 rng(mp.fit_seed);
  auto model = channel::fit_link_gain(mp.geometry(range), band, env, mp.fit_samples, rng);
  std::lock_guard lock(g_fit_mutex);
  g_fit_cache.emplace(key, model);
  return model;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void Topology::validate() const {
  std::vector<std::string> issues;
  if (pu_nodes.size() < 2) issues.emplace_back("topology: the PU chain needs at least one hop");
  if (su_nodes.size() < 2) issues.emplace_back("topology: the SU chain needs at least one hop");
  for (const auto& v : pu_nodes)
    if (!finite_vec(v)) issues.emplace_back("topology: non-finite PU node position");
  for (const auto& v : su_nodes)
    if (!finite_vec(v)) issues.emplace_back("topology: non-finite SU node position");
  std::vector<Vec3> all(pu_nodes);
  all.insert(all.end(), su_nodes.begin(), su_nodes.end());
  for (std::size_t a = 0; a < all.size(); ++a)
    for (std::size_t b = a + 1; b < all.size(); ++b)
      if ((all[a] - all[b]).norm() < 1e-6) {
        issues.emplace_back("topology: nodes " + std::to_string(a) + " and " + std::to_string(b) + " coincide");
      }
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

Topology Topology::crossing(double end_to_end_m, int pu_hops, int su_hops, double su_offset_m, double node_depth_m) {
  if (!(end_to_end_m > 0.0) || pu_hops < 1 || su_hops < 1)
    throw ConfigError("topology: crossing layout needs a positive length and at least one hop per chain");
  Topology t;
  const double half = 0.5 * end_to_end_m;
  for (int k = 0; k <= pu_hops; ++k)
    t.pu_nodes.emplace_back(-half + end_to_end_m * k / pu_hops, 0.0, -node_depth_m);
  for (int k = 0; k <= su_hops; ++k)
    t.su_nodes.emplace_back(su_offset_m, -half + end_to_end_m * k / su_hops, -node_depth_m);
  return t;
}

void TrafficModel::validate() const {
  std::vector<std::string> issues;
  if (!(alpha1 >= 0.0 && alpha1 <= 1.0)) issues.emplace_back("traffic.alpha1 must lie in [0, 1]");
  if (!(alpha2 >= 0.0 && alpha2 <= 1.0)) issues.emplace_back("traffic.alpha2 must lie in [0, 1]");
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

channel::MultipathGeometry MultipathSettings::geometry(double range_m) const {
  return channel::shallow_water_geometry(range_m, water_depth_m, node_depth_m, surface_reflection,
                                         bottom_reflection, length_deviation_std, micropath_count,
                                         micropath_delay_spread);
}

double NetworkSpec::su_bits(int hop) const {
  if (su_packet_bits.empty()) return pu_packet_bits;
  return su_packet_bits.at(static_cast<std::size_t>(hop - 1));
}

void NetworkSpec::validate() const {
  topology.validate();
  env.validate();
  band.validate();
  traffic.validate();
  std::vector<std::string> issues;
  const int np = topology.pu_hops(), ns = topology.su_hops();
  if (np + ns > 24) issues.emplace_back("topology: at most 24 links are supported");
  if (ns > 16) issues.emplace_back("topology: at most 16 SU hops are supported");
  if (!(bit_rate_bps > 0.0)) issues.emplace_back("bit_rate_bps must be positive");
  if (!std::isfinite(tx_power_db)) issues.emplace_back("tx_power_db must be finite");
  if (!(slot_length_s > 0.0)) issues.emplace_back("slot_length_s must be positive");
  if (!(pu_packet_bits >= 8.0)) issues.emplace_back("packets: PU packet must hold at least one byte");
  if (!su_packet_bits.empty() && static_cast<int>(su_packet_bits.size()) != ns)
    issues.emplace_back("packets: one SU packet size per SU hop");
  for (double b : su_packet_bits)
    if (!(b >= 8.0)) issues.emplace_back("packets: SU packets must hold at least one byte");
  if (!(min_su_packet_bits >= 8.0)) issues.emplace_back("packets: minimum SU packet must be at least one byte");
  if (!pu_channels.empty() && static_cast<int>(pu_channels.size()) != np)
    issues.emplace_back("band plan: one PU channel per PU hop");
  if (!su_channels.empty() && static_cast<int>(su_channels.size()) != ns)
    issues.emplace_back("band plan: one SU channel per SU hop");
  for (const auto* group : {&pu_channels, &su_channels})
    for (const auto& ch : *group) {
      if (!(ch.bit_rate_bps > 0.0)) issues.emplace_back("band plan: channel bit rate must be positive");
      if (!(ch.band.bandwidth_khz > 0.0 && ch.band.low_khz() > 0.0)) issues.emplace_back("band plan: invalid channel band");
    }
  if (sensing_sigma && !(*sensing_sigma > 0.0)) issues.emplace_back("sensing.sigma_n must be positive");
  if (!(sensing_range_slots > 0.0)) issues.emplace_back("sensing range must be positive");
  if (multipath.fit_samples < 10000) issues.emplace_back("multipath.fit_samples must be at least 10000");
  if (!(multipath.node_depth_m > 0.0 && multipath.node_depth_m < multipath.water_depth_m))
    issues.emplace_back("multipath: node depth must lie strictly inside the water column");
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

// ---------------------------------------------------------------------------
// Network

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  tx_power_ = std::pow(10.0, spec_.tx_power_db / 10.0);
  build_links();
  build_overlap();
  build_sensing();
  build_loss_cache();
}

void Network::build_links() {
  const auto& topo = spec_.topology;
  const int np = topo.pu_hops(), ns = topo.su_hops();
  const LinkChannel shared{0, spec_.band, spec_.bit_rate_bps};
  std::vector<std::string> issues;
  auto make = [&](LinkKind kind, int hop, int tx_node, int rx_node, const Vec3& tx, const Vec3& rx,
                  const LinkChannel& ch, double bits) {
    Link l;
    l.kind = kind;
    l.hop = hop;
    l.tx_node = tx_node;
    l.rx_node = rx_node;
    l.tx = tx;
    l.rx = rx;
    l.channel = ch;
    l.packet_bits = bits;
    l.gain = cached_fit(l.length(), ch.band, spec_.env, spec_.multipath);
    l.noise_power = channel::in_band_noise_power(ch.band, spec_.env);
    const double end = l.length() / spec_.env.sound_speed + l.duration_s();
    if (end > spec_.slot_length_s + kTimeEps) {
      std::ostringstream os;
      os << (kind == LinkKind::primary ? "PU" : "SU") << " hop " << hop << ": packet ends at " << end
         << " s, beyond the slot length";
      issues.push_back(os.str());
    }
    links_.push_back(std::move(l));
  };
  for (int j = 1; j <= np; ++j)
    make(LinkKind::primary, j, j - 1, j, topo.pu_nodes[j - 1], topo.pu_nodes[j],
         spec_.pu_channels.empty() ? shared : spec_.pu_channels[j - 1], spec_.pu_packet_bits);
  for (int i = 1; i <= ns; ++i)
    make(LinkKind::secondary, i, np + i, np + i + 1, topo.su_nodes[i - 1], topo.su_nodes[i],
         spec_.su_channels.empty() ? shared : spec_.su_channels[i - 1], spec_.su_bits(i));
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

double Network::interferer_gain(double distance_m, const channel::Band& band) const {
  return channel::mean_link_gain(spec_.multipath.geometry(distance_m), band, spec_.env);
}

ArrivalWindow desired_window(const Network& net, int victim) {
  const Link& v = net.link(victim);
  const double a = net.propagation_delay(v.tx, v.rx);
  return {a, a + v.duration_s()};
}

ArrivalWindow interferer_window(const Network& net, int interferer, int victim) {
  const Link& u = net.link(interferer);
  const Link& v = net.link(victim);
  const double b = net.propagation_delay(u.tx, v.rx);
  return {b, b + u.duration_s()};
}

void Network::build_overlap() {
  const int n = link_count();
  std::vector<OverlapEntry> entries(static_cast<std::size_t>(n * n));
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) {
      auto& e = entries[static_cast<std::size_t>(u * n + v)];
      e.interferer = u;
      e.victim = v;
      if (u == v) continue;
      const Link& lu = link(u);
      const Link& lv = link(v);
      e.same_channel = lu.channel.channel == lv.channel.channel;
      const auto dw = desired_window(*this, v);
      const auto iw = interferer_window(*this, u, v);
      e.arrival_offset_s = iw.start_s - dw.start_s;
      const double lo = std::max(dw.start_s, iw.start_s);
      const double hi = std::min(dw.end_s, iw.end_s);
      e.overlap_start_s = lo;
      e.overlap_end_s = std::max(lo, hi);
      const double dist = (lu.tx - lv.rx).norm();
      if (dist > 1e-6) e.power = tx_power_ * interferer_gain(dist, lv.channel.band);
      if (!e.same_channel || hi - lo <= kTimeEps || dist <= 1e-6) continue;
      const double rate = lv.channel.bit_rate_bps;
      const auto bits = static_cast<std::int64_t>(std::llround(lv.packet_bits));
      const auto first = static_cast<std::int64_t>(std::floor((lo - dw.start_s) * rate + kTimeEps)) + 1;
      const auto last = static_cast<std::int64_t>(std::ceil((hi - dw.start_s) * rate - kTimeEps));
      e.first_bit = std::clamp<std::int64_t>(first, 1, bits);
      e.last_bit = std::clamp<std::int64_t>(last, 1, bits);
      if (first > bits || last < 1 || e.last_bit < e.first_bit) e.first_bit = e.last_bit = 0;
    }
  overlap_ = OverlapTable(n, std::move(entries));
}

void Network::build_sensing() {
  const int np = pu_hops(), ns = su_hops();
  const double range_m = spec_.sensing_range_slots * spec_.slot_length_s * spec_.env.sound_speed;
  sensing_pu_ = Eigen::MatrixXd::Zero(ns, np);
  sensing_su_ = Eigen::MatrixXd::Zero(ns, ns);
  sensing_sigma_ = Eigen::VectorXd::Ones(ns);
  auto received = [&](const Vec3& sensor, const Link& src) {
    const double d = (sensor - src.tx).norm();
    if (d <= 1e-6 || d > range_m) return 0.0;
    return tx_power_ * interferer_gain(d, src.channel.band);
  };
  for (int i = 1; i <= ns; ++i) {
    const Vec3& sensor = link(su_link(i)).tx;
    for (int j = 1; j <= np; ++j) sensing_pu_(i - 1, j - 1) = received(sensor, link(pu_link(j)));
    for (int k = 1; k <= ns; ++k)
      if (k != i) sensing_su_(i - 1, k - 1) = received(sensor, link(su_link(k)));
    if (spec_.sensing_sigma) {
      sensing_sigma_(i - 1) = *spec_.sensing_sigma;
    } else {
      const double strongest = np > 0 ? sensing_pu_.row(i - 1).maxCoeff() : 0.0;
      // strongest PU seen at 10 dB above the measurement noise
      if (strongest > 0.0) sensing_sigma_(i - 1) = strongest / std::sqrt(10.0);
    }
  }
}

bool Network::half_duplex_blocked(int l, LinkMask active) const {
  const int rx = link(l).rx_node;
  for (int u = 0; u < link_count(); ++u)
    if (u != l && (active >> u & 1u) && link(u).tx_node == rx) return true;
  return false;
}

std::vector<channel::BerSegment> Network::ber_profile(int l, LinkMask active) const {
  if (l < 0 || l >= link_count()) throw ContractViolation("ber_profile: link index out of range");
  if (!(active >> l & 1u)) throw ContractViolation("ber_profile: link is not active");
  const Link& v = link(l);
  const auto bits = static_cast<std::int64_t>(std::llround(v.packet_bits));
  std::vector<std::int64_t> cuts{1, bits + 1};
  std::vector<int> hits;
  for (int u = 0; u < link_count(); ++u) {
    if (u == l || !(active >> u & 1u)) continue;
    const auto& e = overlap_.at(u, l);
    if (e.empty()) continue;
    hits.push_back(u);
    cuts.push_back(e.first_bit);
    cuts.push_back(e.last_bit + 1);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const double ln_p = std::log(tx_power_);
  std::vector<channel::BerSegment> out;
  std::uint32_t prev_set = ~0u;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const std::int64_t first = cuts[k], last = cuts[k + 1] - 1;
    double interference = 0.0;
    std::uint32_t set = 0;
    for (int u : hits) {
      const auto& e = overlap_.at(u, l);
      if (e.first_bit <= first && e.last_bit >= last) {
        interference += e.power;
        set |= 1u << u;
      }
    }
    if (!out.empty() && set == prev_set) {
      out.back().last_bit = last;
      continue;
    }
    const double mu = v.gain.mu_ln_gain + ln_p - std::log(interference + v.noise_power);
    out.push_back({first, last, interference, channel::ber_lognormal(mu, v.gain.sigma_ln_gain)});
    prev_set = set;
  }
  return out;
}

double Network::compute_loss(int l, LinkMask active) const {
  if (half_duplex_blocked(l, active)) return 1.0;
  const auto segs = ber_profile(l, active);
  return channel::packet_loss(std::span<const channel::BerSegment>(segs));
}

void Network::build_loss_cache() {
  const int n = link_count();
  loss_cache_.clear();
  if (n > kMaxTabulatedLinks) return;
  const std::size_t masks = std::size_t{1} << n;
  loss_cache_.assign(static_cast<std::size_t>(n) * masks, std::numeric_limits<double>::quiet_NaN());
  for (int l = 0; l < n; ++l)
    for (std::size_t m = 0; m < masks; ++m)
      if (m >> l & 1u) loss_cache_[static_cast<std::size_t>(l) * masks + m] = compute_loss(l, static_cast<LinkMask>(m));
}

double Network::loss(int l, LinkMask active) const {
  if (l < 0 || l >= link_count()) throw ContractViolation("loss: link index out of range");
  if (!(active >> l & 1u)) throw ContractViolation("loss: link is not active");
  if (loss_cache_.empty()) return compute_loss(l, active);
  return loss_cache_[(static_cast<std::size_t>(l) << link_count()) + active];
}

double Network::max_one_hop_delay() const {
  double m = 0.0;
  for (const auto& l : links_) m = std::max(m, l.length() / spec_.env.sound_speed);
  return m;
}

Network Network::with_su_packet_bits(int hop, double bits) const {
  if (hop < 1 || hop > su_hops()) throw ContractViolation("with_su_packet_bits: hop out of range");
  NetworkSpec s = spec_;
  if (s.su_packet_bits.empty()) s.su_packet_bits.assign(static_cast<std::size_t>(su_hops()), s.pu_packet_bits);
  s.su_packet_bits[static_cast<std::size_t>(hop - 1)] = bits;
  return Network(std::move(s));
}

std::vector<double> critical_sizes(const Network& net, int su_hop) {
  if (su_hop < 1 || su_hop > net.su_hops()) throw ContractViolation("critical_sizes: hop out of range");
  const auto& spec = net.spec();
  const Link& s = net.link(net.su_link(su_hop));
  const double rate = s.channel.bit_rate_bps;
  const double a_s = net.propagation_delay(s.tx, s.rx);
  auto bytes_floor = [](double bits) { return std::floor(bits / 8.0 + 1e-9) * 8.0; };
  const double max_bits = std::min(spec.pu_packet_bits, bytes_floor((spec.slot_length_s - a_s) * rate));
  const double min_bits = std::min(spec.min_su_packet_bits, max_bits);
  std::vector<double> out{max_bits};
  auto add = [&](double bits) { out.push_back(std::clamp(bytes_floor(bits), min_bits, max_bits)); };
  for (int j = 1; j <= net.pu_hops(); ++j) {
    const Link& p = net.link(net.pu_link(j));
    if (p.channel.channel != s.channel.channel) continue;
    // keep the SU packet off the PU receiver
    const double a_p = net.propagation_delay(p.tx, p.rx);
    const double b_sp = net.propagation_delay(s.tx, p.rx);
    if (b_sp < a_p + p.duration_s() - kTimeEps) add(b_sp < a_p ? (a_p - b_sp) * rate : 0.0);
    // keep the PU packet off the SU receiver
    const double b_ps = net.propagation_delay(p.tx, s.rx);
    if (b_ps + p.duration_s() > a_s + kTimeEps) add(b_ps > a_s ? (b_ps - a_s) * rate : 0.0);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Markov chain

StateSpace::StateSpace(int pu_hops, int su_hops) : pu_hops_(pu_hops), su_hops_(su_hops) {
  if (pu_hops < 1 || su_hops < 1 || pu_hops > 30 || su_hops > 30)
    throw ConfigError("state space: hop counts out of range");
  for (int phase = 0; phase < kReuseFactor; ++phase) {
    std::vector<int> eligible;
    for (int j = 1; j <= pu_hops; ++j)
      if (hop_phase(j) == phase) eligible.push_back(j);
    const bool source_visible = hop_phase(1) == phase;
    for (std::uint32_t sub = 0; sub < (1u << eligible.size()); ++sub) {
      std::uint32_t pu = 0;
      for (std::size_t k = 0; k < eligible.size(); ++k)
        if (sub >> k & 1u) pu |= 1u << (eligible[k] - 1);
      for (int src = 0; src < 2; ++src) {
        if (source_visible && static_cast<bool>(src) != static_cast<bool>(pu & 1u)) continue;
        for (std::uint32_t buf = 0; buf < (1u << (su_hops - 1)); ++buf) {
          SystemState s{phase, pu, static_cast<bool>(src), (buf << 1) | 1u};
          lookup_.emplace(key(s), static_cast<int>(states_.size()));
          states_.push_back(s);
        }
      }
    }
  }
}

int StateSpace::index(const SystemState& s) const {
  auto it = lookup_.find(key(s));
  if (it == lookup_.end()) throw ContractViolation("StateSpace: unreachable state");
  return it->second;
}

namespace {

struct SlotEvents {
  std::vector<int> links;        // active links in index order
  std::vector<double> success;   // per active link
  bool arrival_draw = false;     // a fresh source draw happens in the next slot
  double arrival_prob = 0.0;
};

SlotEvents slot_events(const Network& net, const SystemState& s, Decision eff) {
  const int np = net.pu_hops();
  if (eff & ~s.buffers) throw ContractViolation("decision transmits from an empty buffer");
  const LinkMask mask = s.pu | (static_cast<LinkMask>(eff) << np);
  SlotEvents ev;
  for (int l = 0; l < net.link_count(); ++l)
    if (mask >> l & 1u) {
      ev.links.push_back(l);
      ev.success.push_back(1.0 - net.loss(l, mask));
    }
  const int next_phase = (s.phase + 1) % kReuseFactor;
  ev.arrival_draw = next_phase == hop_phase(1);
  ev.arrival_prob = s.source_on ? net.spec().traffic.alpha2 : net.spec().traffic.alpha1;
  return ev;
}

// Deterministic successor given which active links succeeded and the source draw.
SlotResult advance(const Network& net, const SystemState& s, Decision eff, std::uint32_t succeeded_links,
                   bool arrival) {
  const int np = net.pu_hops(), ns = net.su_hops();
  SlotResult r;
  r.next.phase = (s.phase + 1) % kReuseFactor;
  std::uint32_t pu_next = 0;
  for (int j = 1; j < np; ++j)
    if ((s.pu >> (j - 1) & 1u) && (succeeded_links >> net.pu_link(j) & 1u)) pu_next |= 1u << j;
  if ((s.pu >> (np - 1) & 1u) && (succeeded_links >> net.pu_link(np) & 1u)) r.pu_bits = net.spec().pu_packet_bits;
  if (r.next.phase == hop_phase(1)) {
    r.next.source_on = arrival;
    if (arrival) pu_next |= 1u;
  } else {
    r.next.source_on = s.source_on;
  }
  r.next.pu = pu_next;
  std::uint32_t buf = 1u;
  for (int i = 2; i <= ns; ++i) {
    const bool keep = (s.buffers >> (i - 1) & 1u) && !(eff >> (i - 1) & 1u);
    const bool fill = (eff >> (i - 2) & 1u) && (succeeded_links >> net.su_link(i - 1) & 1u);
    if (keep || fill) buf |= 1u << (i - 1);
  }
  r.next.buffers = buf;
  if ((eff >> (ns - 1) & 1u) && (succeeded_links >> net.su_link(ns) & 1u)) r.su_bits = net.link(net.su_link(ns)).packet_bits;
  return r;
}

}  // namespace

std::vector<Outcome> slot_outcomes(const Network& net, const SystemState& s, Decision eff) {
  const auto ev = slot_events(net, s, eff);
  const int k = static_cast<int>(ev.links.size());
  std::vector<Outcome> out;
  for (std::uint32_t pattern = 0; pattern < (1u << k); ++pattern) {
    double p = 1.0;
    std::uint32_t ok = 0;
    for (int a = 0; a < k; ++a) {
      if (pattern >> a & 1u) {
        p *= ev.success[a];
        ok |= 1u << ev.links[a];
      } else {
        p *= 1.0 - ev.success[a];
      }
    }
    if (p == 0.0) continue;
    for (int arr = 0; arr < (ev.arrival_draw ? 2 : 1); ++arr) {
      double q = p;
      if (ev.arrival_draw) q *= arr ? ev.arrival_prob : 1.0 - ev.arrival_prob;
      if (q == 0.0) continue;
      const auto r = advance(net, s, eff, ok, arr == 1);
      out.push_back({r.next, q, r.pu_bits, r.su_bits});
    }
  }
  return out;
}

TransitionModel::TransitionModel(const Network& net) : space_(net.pu_hops(), net.su_hops()) {
  const std::size_t n = static_cast<std::size_t>(space_.size());
  if (n > net.spec().state_cap)
    throw ConfigError("state space has " + std::to_string(n) + " states, above the configured cap");
  const int ns = net.su_hops();
  const Decision decisions = Decision{1} << ns;
  matrices_.resize(decisions);
  g_.assign(decisions, Eigen::VectorXd::Zero(space_.size()));
  g_pu_ = g_su_ = g_;
  for (Decision d = 0; d < decisions; ++d) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int si = 0; si < space_.size(); ++si) {
      const SystemState& s = space_.at(si);
      for (const auto& o : slot_outcomes(net, s, effective_decision(s, d))) {
        trip.emplace_back(si, space_.index(o.next), o.probability);
        g_pu_[d](si) += o.probability * o.pu_bits;
        g_su_[d](si) += o.probability * o.su_bits;
      }
    }
    matrices_[d].resize(space_.size(), space_.size());
    matrices_[d].setFromTriplets(trip.begin(), trip.end());
    matrices_[d].makeCompressed();
    g_[d] = g_pu_[d] + g_su_[d];
  }
}

Eigen::VectorXd TransitionModel::initial_distribution() const {
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(space_.size());
  mu(space_.index(space_.warmup_state())) = 1.0;
  mu = mu * matrices_[0];
  mu = mu * matrices_[0];
  return mu.transpose();
}

void TransitionModel::write_csv(std::ostream& out) const {
  out << "state,decision,next_state,probability\n";
  out.precision(17);
  for (int d = 0; d < decision_count(); ++d)
    for (int r = 0; r < matrices_[d].outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(matrices_[d], r); it; ++it)
        out << r << ',' << d << ',' << it.col() << ',' << it.value() << '\n';
}

SlotResult simulate_slot(const Network& net, const SystemState& s, Decision decision, std::mt19937_64& rng) {
  const auto ev = slot_events(net, s, decision);
  // a fixed number of draws per slot (arrival, then one per link) keeps runs under one
  // seed aligned across schedulers
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double arrival_u = u(rng);
  std::array<double, 32> link_u{};
  for (int l = 0; l < net.link_count(); ++l) link_u[static_cast<std::size_t>(l)] = u(rng);
  const bool arrival = ev.arrival_draw && arrival_u < ev.arrival_prob;
  std::uint32_t ok = 0;
  for (std::size_t a = 0; a < ev.links.size(); ++a)
    if (link_u[static_cast<std::size_t>(ev.links[a])] < ev.success[a]) ok |= 1u << ev.links[a];
  return advance(net, s, decision, ok, arrival);
}

Eigen::VectorXd sensing_mean(const Network& net, const SystemState& s, Decision eff) {
  Eigen::VectorXd pu(net.pu_hops()), su(net.su_hops());
  for (int j = 0; j < net.pu_hops(); ++j) pu(j) = (s.pu >> j) & 1u;
  for (int i = 0; i < net.su_hops(); ++i) su(i) = (eff >> i) & 1u;
  return net.sensing_pu() * pu + net.sensing_su() * su;
}

double observe(const Network& net, const SystemState& s, Decision eff, int su_hop, std::mt19937_64& rng) {
  if (su_hop < 1 || su_hop > net.su_hops()) throw ContractViolation("observe: hop out of range");
  const double mean = sensing_mean(net, s, eff)(su_hop - 1);
  std::normal_distribution<double> n(0.0, net.sensing_sigma()(su_hop - 1));
  return mean + n(rng);
}

Eigen::VectorXd observe_all(const Network& net, const SystemState& s, Decision eff, std::mt19937_64& rng) {
  Eigen::VectorXd y = sensing_mean(net, s, eff);
  for (int i = 0; i < y.size(); ++i) {
    std::normal_distribution<double> n(0.0, net.sensing_sigma()(i));
    y(i) += n(rng);
  }
  return y;
}

}  // namespace uwcog::net
