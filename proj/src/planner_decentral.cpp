#include "uwcog/planner_decentral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "uwcog/errors.hpp"

namespace uwcog::decentral {

namespace {

constexpr double kImprove = 1e-12;

double slack(double limit) { return 1e-9 * (1.0 + std::abs(limit)); }

void check_reuse(int reuse) {
  if (reuse != 0 && reuse != net::kReuseFactor)
    throw ConfigError("reuse factor must be 0 (disabled) or " + std::to_string(net::kReuseFactor));
}

// Prefers transmitting only on a strict improvement.
int choose(bool eligible, bool feasible, double q0, double q1) {
  return eligible && feasible && q1 > q0 + kImprove * std::abs(q0) ? 1 : 0;
}

}  // namespace

LocalModel::LocalModel(const net::Network& net, int su_hop, double neighbour_range_slots) : su_hop_(su_hop) {
  if (su_hop < 1 || su_hop > net.su_hops()) throw ContractViolation("LocalModel: SU hop out of range");
  if (!(neighbour_range_slots > 0.0)) throw ConfigError("neighbour range must be positive");
  const auto& spec = net.spec();
  const net::Link& su = net.link(net.su_link(su_hop));
  su_bits_ = su.packet_bits;
  const double radius = neighbour_range_slots * spec.slot_length_s * spec.env.sound_speed;
  int lo = 0, hi = -1;
  for (int j = 1; j <= net.pu_hops(); ++j) {
    const net::Link& pu = net.link(net.pu_link(j));
    if ((pu.tx - su.rx).norm() <= radius || (pu.rx - su.tx).norm() <= radius) {
      if (lo == 0) lo = j;
      hi = j;
    }
  }
  for (int j = lo; lo > 0 && j <= hi; ++j) hops_.push_back(j);
  const int n = static_cast<int>(hops_.size());
  const std::uint32_t su_bit = 1u << net.su_link(su_hop);

  auto key = [n](const LocalState& s) { return (s.phase * 2 + (s.source_on ? 1 : 0)) << n | static_cast<int>(s.pu); };
  std::vector<int> lookup(static_cast<std::size_t>(6) << n, -1);
  auto intern = [&](const LocalState& s) {
    int& slot = lookup[static_cast<std::size_t>(key(s))];
    if (slot < 0) {
      slot = static_cast<int>(states_.size());
      states_.push_back(s);
    }
    return slot;
  };

  struct Edge {
    int from, to, delta;
    double p;
  };
  std::vector<Edge> edges;
  std::vector<double> gp[2], gs[2];
  const auto& traffic = spec.traffic;
  const int first_phase = n > 0 ? net::hop_phase(hops_.front()) : -1;

  intern({net::slot_phase(-1), 0u, false});
  for (std::size_t k = 0; k < states_.size(); ++k) {
    const LocalState s = states_[k];
    for (int delta = 0; delta < 2; ++delta) {
      net::LinkMask mask = delta ? su_bit : 0u;
      std::vector<int> active;
      for (int h = 0; h < n; ++h)
        if (s.pu >> h & 1u) {
          mask |= 1u << net.pu_link(hops_[h]);
          active.push_back(h);
        }
      std::vector<double> ok(active.size());
      for (std::size_t a = 0; a < active.size(); ++a) {
        const double l = net.loss(net.pu_link(hops_[active[a]]), mask);
        ok[a] = 1.0 - l;
        loss_.resize(std::max(loss_.size(), ((k * n + active[a]) * 2 + delta) + 1), 0.0);
        loss_[(k * n + active[a]) * 2 + delta] = l;
      }
      double reward_p = 0.0;
      for (std::size_t a = 0; a < active.size(); ++a)
        if (active[a] == n - 1) reward_p = spec.pu_packet_bits * ok[a];
      const double reward_s = delta ? su_bits_ * (1.0 - net.loss(net.su_link(su_hop), mask)) : 0.0;
      if (gp[delta].size() <= k) {
        gp[delta].resize(k + 1, 0.0);
        gs[delta].resize(k + 1, 0.0);
      }
      gp[delta][k] = reward_p;
      gs[delta][k] = reward_s;

      const int next_phase = (s.phase + 1) % net::kReuseFactor;
      const bool draw = next_phase == first_phase;
      const double on = s.source_on ? traffic.alpha2 : traffic.alpha1;
      const std::size_t m = active.size();
      for (std::uint32_t pattern = 0; pattern < (1u << m); ++pattern) {
        double p = 1.0;
        std::uint32_t next_pu = 0;
        for (std::size_t a = 0; a < m; ++a) {
          const bool success = pattern >> a & 1u;
          p *= success ? ok[a] : 1.0 - ok[a];
          if (success && active[a] + 1 < n) next_pu |= 1u << (active[a] + 1);
        }
        if (p == 0.0) continue;
        for (int arrival = 0; arrival < (draw ? 2 : 1); ++arrival) {
          double q = p;
          LocalState t{next_phase, next_pu, s.source_on};
          if (draw) {
            q *= arrival ? on : 1.0 - on;
            t.source_on = arrival == 1;
            if (arrival) t.pu |= 1u;
          }
          if (q == 0.0) continue;
          edges.push_back({static_cast<int>(k), intern(t), delta, q});
        }
      }
    }
  }
  const int size = static_cast<int>(states_.size());
  loss_.resize(static_cast<std::size_t>(size) * std::max(n, 1) * 2, 0.0);
  for (int delta = 0; delta < 2; ++delta) {
    p_[delta] = Eigen::MatrixXd::Zero(size, size);
    gp_[delta] = Eigen::Map<const Eigen::VectorXd>(gp[delta].data(), size);
    gs_[delta] = Eigen::Map<const Eigen::VectorXd>(gs[delta].data(), size);
    g_[delta] = gp_[delta] + gs_[delta];
  }
  for (const auto& e : edges) p_[e.delta](e.from, e.to) += e.p;

  sigma_ = net.sensing_sigma()(su_hop - 1);
  mean_ = Eigen::VectorXd::Zero(size);
  for (int k = 0; k < size; ++k)
    for (int h = 0; h < n; ++h)
      if (states_[k].pu >> h & 1u) mean_(k) += net.sensing_pu()(su_hop - 1, hops_[h] - 1);
}

int LocalModel::index(const LocalState& s) const {
  const auto it = std::find(states_.begin(), states_.end(), s);
  if (it == states_.end()) throw ContractViolation("LocalModel: unreachable local state");
  return static_cast<int>(it - states_.begin());
}

int LocalModel::warmup_index() const { return 0; }

double LocalModel::pu_loss(int k, int hop, int delta) const {
  const int n = static_cast<int>(hops_.size());
  const auto it = std::find(hops_.begin(), hops_.end(), hop);
  if (it == hops_.end()) throw ContractViolation("LocalModel: hop outside the neighbourhood");
  const int h = static_cast<int>(it - hops_.begin());
  if (!(states_[static_cast<std::size_t>(k)].pu >> h & 1u)) return 0.0;
  return loss_[(static_cast<std::size_t>(k) * n + h) * 2 + delta];
}

Eigen::VectorXd belief_update_local(const LocalModel& model, const Eigen::VectorXd& belief, int transition, double y) {
  if (belief.size() != model.size()) throw ContractViolation("belief_update_local: belief size mismatch");
  const Eigen::VectorXd predicted = model.matrix(transition).transpose() * belief;
  const double sigma = model.sensing_sigma();
  const auto& mean = model.sensing_mean();
  double top = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd log_like(model.size());
  for (int k = 0; k < model.size(); ++k) {
    const double r = (y - mean(k)) / sigma;
    log_like(k) = -0.5 * r * r;
    if (predicted(k) > 0.0) top = std::max(top, log_like(k));
  }
  Eigen::VectorXd post = Eigen::VectorXd::Zero(model.size());
  if (std::isfinite(top))
    for (int k = 0; k < model.size(); ++k)
      if (predicted(k) > 0.0) post(k) = predicted(k) * std::exp(log_like(k) - top);
  double z = post.sum();
  if (!(z > 0.0) || !std::isfinite(z)) {
    post = predicted;
    z = post.sum();
  }
  if (!(z > 0.0) || !std::isfinite(z)) throw NumericalError("belief_update_local: belief has no mass after prediction");
  return post / z;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p, const Eigen::VectorXd& start) {
  if (p.rows() != p.cols() || start.size() != p.rows()) throw ContractViolation("stationary_distribution: shape mismatch");
  Eigen::RowVectorXd pi = start.transpose() / start.sum();
  for (int it = 0; it < 100000; ++it) {
    const Eigen::RowVectorXd next = 0.5 * (pi + pi * p);
    const double change = (next - pi).cwiseAbs().maxCoeff();
    pi = next / next.sum();
    if (change < 1e-14) return pi.transpose();
  }
  throw NumericalError("stationary_distribution: power iteration did not converge");
}

double local_beta(double beta, int su_hops) {
  if (su_hops < 1) throw ContractViolation("local_beta: no SU hops");
  return std::pow(beta, 1.0 / su_hops);
}

LocalPlanTable::LocalPlanTable(const LocalModel& model, const LocalPlanOptions& options)
    : horizon_(options.horizon),
      states_(model.size()),
      reuse_(options.reuse),
      su_hop_(model.su_hop()),
      beta_bar_(options.beta_bar) {
  if (horizon_ < 1) throw ConfigError("horizon must be at least 1");
  if (!(beta_bar_ >= 0.0 && beta_bar_ <= 1.0)) throw ConfigError("local beta must lie in [0, 1]");
  check_reuse(reuse_);
  const int m = states_;
  for (int c = 0; c < 2; ++c) {
    g_[c] = model.throughput(c);
    gp_[c] = model.pu_throughput(c);
  }
  h_.assign(static_cast<std::size_t>(horizon_) + 2, Eigen::VectorXd::Zero(m));
  for (int t = horizon_; t >= 1; --t) h_[t] = gp_[0] + model.matrix(0) * h_[t + 1];

  const std::size_t total = static_cast<std::size_t>(horizon_) * 2 * m;
  value_.assign(total, 0.0);
  pu_value_.assign(total, 0.0);
  baseline_.assign(total, 0.0);
  decision_.assign(total, 0);
  feasible_.assign(total, 0);

  Eigen::MatrixXd w(m, 2), wp(m, 2);
  for (int t = horizon_; t >= 1; --t) {
    // slot-t reward plus continuation, per current state and decision
    for (int c = 0; c < 2; ++c) {
      for (int s = 0; s < m; ++s) {
        w(s, c) = g_[c](s) + next_value(t, s, c);
        wp(s, c) = gp_[c](s) + next_pu_value(t, s, c);
      }
    }
    for (int a = 0; a < 2; ++a) {
      const Eigen::MatrixXd q = model.matrix(a) * w;
      const Eigen::MatrixXd qp = model.matrix(a) * wp;
      const Eigen::VectorXd base = model.matrix(a) * h_[t];
      for (int s = 0; s < m; ++s) {
        const std::size_t idx = at(t, basis_index(s, a));
        const double limit = beta_bar_ * base(s);
        const bool feas = qp(s, 1) >= limit - slack(limit);
        const int c = choose(eligible(t), feas, q(s, 0), q(s, 1));
        value_[idx] = q(s, c);
        pu_value_[idx] = qp(s, c);
        decision_[idx] = c;
        feasible_[idx] = feas ? 1 : 0;
        baseline_[idx] = base(s);
      }
    }
  }
}

bool LocalPlanTable::eligible(int t) const { return reuse_ == 0 || t % reuse_ == su_hop_ % reuse_; }

std::size_t LocalPlanTable::at(int t, int basis) const {
  if (t < 1 || t > horizon_) throw ContractViolation("LocalPlanTable: slot out of range");
  if (basis < 0 || basis >= 2 * states_) throw ContractViolation("LocalPlanTable: basis index out of range");
  return static_cast<std::size_t>(t - 1) * 2 * states_ + static_cast<std::size_t>(basis);
}

double LocalPlanTable::next_value(int t, int s, int c) const {
  return t == horizon_ ? 0.0 : value_[at(t + 1, basis_index(s, c))];
}

double LocalPlanTable::next_pu_value(int t, int s, int c) const {
  return t == horizon_ ? 0.0 : pu_value_[at(t + 1, basis_index(s, c))];
}

ThresholdSides LocalPlanTable::sides(int t, const Eigen::VectorXd& omega) const {
  if (omega.size() != states_) throw ContractViolation("LocalPlanTable: belief size mismatch");
  if (t < 1 || t > horizon_) throw ContractViolation("LocalPlanTable: slot out of range");
  ThresholdSides out;
  for (int s = 0; s < states_; ++s) {
    const double w = omega(s);
    if (w == 0.0) continue;
    out.gain += w * (g_[1](s) - g_[0](s));
    out.silent_value += w * (g_[0](s) + next_value(t, s, 0));
    out.loss += w * (next_value(t, s, 0) - next_value(t, s, 1));
    out.pu_value += w * (gp_[1](s) + next_pu_value(t, s, 1));
    out.pu_limit += w * h_[t](s);
  }
  out.pu_limit *= beta_bar_;
  return out;
}

void LocalPlanTable::write_csv(std::ostream& out) const {
  out << "slot,basis,state,decision_a,value,pu_value,decision\n";
  out.precision(17);
  for (int t = 1; t <= horizon_; ++t)
    for (int s = 0; s < states_; ++s)
      for (int a = 0; a < 2; ++a) {
        const int k = basis_index(s, a);
        out << t << ',' << k << ',' << s << ',' << a << ',' << value(t, k) << ',' << pu_value(t, k) << ','
            << decision(t, k) << '\n';
      }
}

int decide_threshold(const LocalPlanTable& plan, int t, const Eigen::VectorXd& omega) {
  if (!plan.eligible(t)) return 0;
  const auto s = plan.sides(t, omega);
  const bool feas = s.pu_value >= s.pu_limit - slack(s.pu_limit);
  return feas && s.gain - s.loss > kImprove * std::abs(s.silent_value) ? 1 : 0;
}

LpSolution solve_packet_lp(const std::vector<double>& gain, const std::vector<double>& cost, double budget,
                           const std::vector<bool>& fixed_zero) {
  const std::size_t n = gain.size();
  if (cost.size() != n || (!fixed_zero.empty() && fixed_zero.size() != n))
    throw ContractViolation("solve_packet_lp: size mismatch");
  LpSolution out;
  out.q.assign(n, 0.0);
  std::vector<std::size_t> order;
  double room = std::max(budget, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if ((!fixed_zero.empty() && fixed_zero[k]) || !(gain[k] > 0.0)) continue;
    if (cost[k] <= 0.0) {
      out.q[k] = 1.0;
      room -= cost[k];
    } else {
      order.push_back(k);
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gain[a] * cost[b] > gain[b] * cost[a]; });
  for (std::size_t k : order) {
    if (room <= 0.0) break;
    out.q[k] = std::min(1.0, room / cost[k]);
    room -= out.q[k] * cost[k];
  }
  for (std::size_t k = 0; k < n; ++k) out.objective += out.q[k] * gain[k];
  return out;
}

LpSolution packet_lp(const LocalModel& model, double beta, int reuse) {
  check_reuse(reuse);
  const int m = model.size();
  const Eigen::VectorXd pi = stationary_distribution(model.matrix(0), Eigen::VectorXd::Unit(m, model.warmup_index()));
  const Eigen::VectorXd dg = model.matrix(0) * (model.throughput(1) - model.throughput(0));
  const Eigen::VectorXd dp = model.matrix(0) * (model.pu_throughput(0) - model.pu_throughput(1));
  std::vector<double> gain(m), cost(m);
  std::vector<bool> fixed(m, false);
  for (int k = 0; k < m; ++k) {
    gain[k] = pi(k) * dg(k);
    cost[k] = pi(k) * dp(k);
    const int next_phase = (model.state(k).phase + 1) % net::kReuseFactor;
    if (reuse != 0 && next_phase != model.su_hop() % net::kReuseFactor) fixed[k] = true;
  }
  const double silent_pu = pi.dot(model.matrix(0) * model.pu_throughput(0));
  auto lp = solve_packet_lp(gain, cost, (1.0 - beta) * silent_pu, fixed);
  lp.objective += pi.dot(model.matrix(0) * model.throughput(0));
  return lp;
}

PacketSizePlan optimize_packet_size(const net::Network& net, int su_hop, double beta, int reuse,
                                    double neighbour_range_slots) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  PacketSizePlan plan;
  plan.su_hop = su_hop;
  plan.candidates = net::critical_sizes(net, su_hop);
  plan.objective = -std::numeric_limits<double>::infinity();
  for (double bits : plan.candidates) {
    const net::Network variant = net.with_su_packet_bits(su_hop, bits);
    const LocalModel model(variant, su_hop, neighbour_range_slots);
    auto lp = packet_lp(model, beta, reuse);
    plan.objectives.push_back(lp.objective);
    if (lp.objective > plan.objective + kImprove * std::abs(plan.objective) || plan.q.empty()) {
      plan.objective = lp.objective;
      plan.chosen_bits = bits;
      plan.q = std::move(lp.q);
    }
  }
  return plan;
}

DctsScheme plan_dcts(const net::NetworkSpec& spec, const DctsOptions& options) {
  check_reuse(options.reuse);
  if (!(options.beta >= 0.0 && options.beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  net::NetworkSpec chosen = spec;
  std::vector<PacketSizePlan> packets;
  if (options.optimize_packets) {
    const net::Network base(spec);
    chosen.su_packet_bits.assign(static_cast<std::size_t>(base.su_hops()), 0.0);
    for (int i = 1; i <= base.su_hops(); ++i) {
      packets.push_back(optimize_packet_size(base, i, options.beta, options.reuse, options.neighbour_range_slots));
      chosen.su_packet_bits[static_cast<std::size_t>(i - 1)] = packets.back().chosen_bits;
    }
  }
  DctsScheme scheme{net::Network(chosen), {}, {}, std::move(packets)};
  const double beta_bar = local_beta(options.beta, scheme.net.su_hops());
  for (int i = 1; i <= scheme.net.su_hops(); ++i) {
    scheme.models.emplace_back(scheme.net, i, options.neighbour_range_slots);
    scheme.plans.emplace_back(scheme.models.back(), LocalPlanOptions{options.horizon, beta_bar, options.reuse});
  }
  return scheme;
}

EpisodeResult run_local_episode(const net::Network& net, const std::vector<LocalModel>& models, const LocalRule& rule,
                                const EpisodeOptions& options) {
  const int ns = net.su_hops();
  if (static_cast<int>(models.size()) != ns) throw ContractViolation("run_local_episode: one local model per SU hop");
  EpisodeStreams streams(options.seed, options.run);
  const net::StateSpace space(net.pu_hops(), ns);
  net::SystemState s = space.warmup_state();
  for (int k = 0; k < 2; ++k) s = net::simulate_slot(net, s, 0, streams.environment).next;

  // belief of each SU over its local state in the previous slot; slot 0 carries no measurement
  std::vector<Eigen::VectorXd> belief;
  std::vector<int> last(static_cast<std::size_t>(ns), 0);
  for (const auto& m : models) {
    const Eigen::VectorXd warm = Eigen::VectorXd::Unit(m.size(), m.warmup_index());
    belief.push_back(m.matrix(0).transpose() * warm);
  }

  EpisodeResult out;
  for (int t = 1; t <= options.horizon; ++t) {
    net::Decision d = 0;
    for (int i = 0; i < ns; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const Eigen::VectorXd predicted = models[k].matrix(last[k]).transpose() * belief[k];
      if (rule(i + 1, t, predicted, streams.policy)) d |= 1u << i;
    }
    const net::Decision eff = net::effective_decision(s, d);
    const Eigen::VectorXd y = net::observe_all(net, s, eff, streams.sensing);
    const auto r = net::simulate_slot(net, s, eff, streams.environment);
    out.pu_bits += r.pu_bits;
    out.su_bits += r.su_bits;
    out.su_attempts += std::popcount(eff);
    ++out.slots;
    if (options.record_trace) out.trace.push_back({t, s.pu, d, eff, r.pu_bits, r.su_bits});
    for (int i = 0; i < ns; ++i) {
      const auto k = static_cast<std::size_t>(i);
      belief[k] = belief_update_local(models[k], belief[k], last[k], y(i));
      last[k] = static_cast<int>(d >> i & 1u);
    }
    s = r.next;
  }
  return out;
}

EpisodeResult run_episode(const DctsScheme& scheme, const EpisodeOptions& options) {
  for (const auto& p : scheme.plans)
    if (options.horizon > p.horizon()) throw ContractViolation("run_episode: horizon exceeds the plan");
  const auto& plans = scheme.plans;
  return run_local_episode(
      scheme.net, scheme.models,
      [&plans](int i, int t, const Eigen::VectorXd& omega, std::mt19937_64&) {
        return decide_threshold(plans[static_cast<std::size_t>(i - 1)], t, omega);
      },
      options);
}

}  // namespace uwcog::decentral
