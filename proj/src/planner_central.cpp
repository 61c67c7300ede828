#include "uwcog/planner_central.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "uwcog/errors.hpp"

namespace uwcog::central {

namespace {

constexpr double kSumTolerance = 1e-9;

// Decisions ordered by number of transmitting hops, then by bitmask.
std::vector<Decision> decision_order(int count) {
  std::vector<Decision> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), Decision{0});
  std::stable_sort(order.begin(), order.end(),
                   [](Decision a, Decision b) { return std::popcount(a) < std::popcount(b); });
  return order;
}

}  // namespace

Eigen::VectorXd belief_update(const net::Network& net, const net::TransitionModel& model,
                              const Eigen::VectorXd& belief, Decision transition, const Eigen::VectorXd& y,
                              Decision observed) {
  const auto& space = model.states();
  if (belief.size() != space.size()) throw ContractViolation("belief_update: belief size mismatch");
  if (y.size() != net.su_hops()) throw ContractViolation("belief_update: one measurement per SU hop");
  const Eigen::VectorXd predicted = model.matrix(transition).transpose() * belief;
  const Eigen::VectorXd& sigma = net.sensing_sigma();

  Eigen::VectorXd log_like = Eigen::VectorXd::Constant(space.size(), -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < space.size(); ++k) {
    if (!(predicted(k) > 0.0)) continue;
    const auto& s = space.at(k);
    const Eigen::VectorXd mean = net::sensing_mean(net, s, net::effective_decision(s, observed));
    log_like(k) = -0.5 * ((y - mean).array() / sigma.array()).square().sum();
    top = std::max(top, log_like(k));
  }
  Eigen::VectorXd post = Eigen::VectorXd::Zero(space.size());
  if (std::isfinite(top))
    for (int k = 0; k < space.size(); ++k)
      if (predicted(k) > 0.0) post(k) = predicted(k) * std::exp(log_like(k) - top);
  double z = post.sum();
  if (!(z > 0.0) || !std::isfinite(z)) {
    post = predicted;
    z = post.sum();
  }
  if (!(z > 0.0) || !std::isfinite(z)) throw NumericalError("belief_update: belief has no mass after prediction");
  return post / z;
}

SilentBaseline::SilentBaseline(const net::TransitionModel& model, int horizon) : horizon_(horizon) {
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  const int m = model.states().size();
  h_.assign(static_cast<std::size_t>(horizon) + 2, Eigen::VectorXd::Zero(m));
  for (int t = horizon; t >= 1; --t) h_[t] = model.pu_throughput(0) + model.matrix(0) * h_[t + 1];
  value_.assign(static_cast<std::size_t>(horizon) + 2, 0.0);
  Eigen::RowVectorXd mu = model.initial_distribution().transpose();
  for (int t = 1; t <= horizon; ++t) {
    value_[t] = mu * h_[t];
    mu = mu * model.matrix(0);
  }
}

const Eigen::VectorXd& SilentBaseline::reward_to_go(int t) const {
  if (t < 1 || t > horizon_ + 1) throw ContractViolation("SilentBaseline: slot out of range");
  return h_[t];
}

double SilentBaseline::value(int t) const {
  if (t < 1 || t > horizon_ + 1) throw ContractViolation("SilentBaseline: slot out of range");
  return value_[t];
}

PlanTable::PlanTable(const net::TransitionModel& model, const PlanOptions& options)
    : horizon_(options.horizon),
      beta_(options.beta),
      states_(model.states().size()),
      decisions_(model.decision_count()),
      silent_(model, options.horizon) {
  if (!(beta_ >= 0.0 && beta_ <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  if (decisions_ > 64) throw ConfigError("centralised planning supports at most 6 SU hops");
  const int m = states_, d = decisions_;
  const std::size_t nb = static_cast<std::size_t>(basis_count());
  const std::size_t total = nb * static_cast<std::size_t>(horizon_);
  value_.assign(total, 0.0);
  pu_value_.assign(total, 0.0);
  baseline_.assign(total, 0.0);
  decision_.assign(total, 0);
  feasible_.assign(total, 0);

  // P(da) P(db) and its rewards against every decision, reused for all slots
  std::vector<Eigen::MatrixXd> pp(static_cast<std::size_t>(d * d));
  std::vector<Eigen::MatrixXd> reward(static_cast<std::size_t>(d * d)), pu_reward(static_cast<std::size_t>(d * d));
  Eigen::MatrixXd g(m, d), gp(m, d);
  for (int k = 0; k < d; ++k) {
    g.col(k) = model.throughput(static_cast<Decision>(k));
    gp.col(k) = model.pu_throughput(static_cast<Decision>(k));
  }
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      const Eigen::MatrixXd pb = Eigen::MatrixXd(model.matrix(static_cast<Decision>(b)));
      auto& ab = pp[static_cast<std::size_t>(a * d + b)];
      ab = model.matrix(static_cast<Decision>(a)) * pb;
      reward[static_cast<std::size_t>(a * d + b)] = ab * g;
      pu_reward[static_cast<std::size_t>(a * d + b)] = ab * gp;
    }

  const auto order = decision_order(d);
  std::vector<double> next_v(nb, 0.0), next_p(nb, 0.0), cur_v(nb), cur_p(nb);
  Eigen::MatrixXd w(m, d), wp(m, d), pw(m, d), pwp(m, d);
  for (int t = horizon_; t >= 1; --t) {
    const Eigen::VectorXd& h = silent_.reward_to_go(t);
    const std::size_t off = static_cast<std::size_t>(t - 1) * nb;
    for (int a = 0; a < d; ++a) {
      const auto& pa = model.matrix(static_cast<Decision>(a));
      for (int b = 0; b < d; ++b) {
        // continuation values V_{t+1}(s', b, c) for every c, then propagate one step with P(a)
        for (int s = 0; s < m; ++s)
          for (int c = 0; c < d; ++c) {
            w(s, c) = next_v[static_cast<std::size_t>(basis_index(s, static_cast<Decision>(b), static_cast<Decision>(c)))];
            wp(s, c) = next_p[static_cast<std::size_t>(basis_index(s, static_cast<Decision>(b), static_cast<Decision>(c)))];
          }
        pw.noalias() = pa * w;
        pwp.noalias() = pa * wp;
        const auto& r = reward[static_cast<std::size_t>(a * d + b)];
        const auto& rp = pu_reward[static_cast<std::size_t>(a * d + b)];
        const Eigen::VectorXd base = pp[static_cast<std::size_t>(a * d + b)] * h;
        for (int s = 0; s < m; ++s) {
          const auto idx = static_cast<std::size_t>(basis_index(s, static_cast<Decision>(a), static_cast<Decision>(b)));
          const double limit = beta_ * base(s);
          const double slack = 1e-9 * (1.0 + std::abs(limit));
          double best = -std::numeric_limits<double>::infinity(), best_p = 0.0;
          Decision best_d = 0;
          std::uint64_t feas = 0;
          for (Decision c : order) {
            const double v = r(s, c) + pw(s, c);
            const double vp = rp(s, c) + pwp(s, c);
            // the silent decision is always admissible
            if (c != 0 && vp < limit - slack) continue;
            const bool first = feas == 0;
            feas |= std::uint64_t{1} << c;
            if (first || v > best + 1e-12 * std::abs(best)) {
              best = v;
              best_p = vp;
              best_d = c;
            }
          }
          cur_v[idx] = best;
          cur_p[idx] = best_p;
          value_[off + idx] = best;
          pu_value_[off + idx] = best_p;
          decision_[off + idx] = best_d;
          feasible_[off + idx] = feas;
          baseline_[off + idx] = base(s);
        }
      }
    }
    next_v.swap(cur_v);
    next_p.swap(cur_p);
  }
}

std::size_t PlanTable::at(int t, int basis) const {
  if (t < 1 || t > horizon_) throw ContractViolation("PlanTable: slot out of range");
  if (basis < 0 || basis >= basis_count()) throw ContractViolation("PlanTable: basis index out of range");
  return static_cast<std::size_t>(t - 1) * static_cast<std::size_t>(basis_count()) + static_cast<std::size_t>(basis);
}

double PlanTable::bound(int t, const Eigen::VectorXd& q, Decision da, Decision db) const {
  double v = 0.0;
  for (int s = 0; s < states_; ++s)
    if (q(s) != 0.0) v += q(s) * value(t, basis_index(s, da, db));
  return v;
}

void PlanTable::write_csv(std::ostream& out) const {
  out << "slot,basis,state,decision_a,decision_b,value,pu_value,decision\n";
  out.precision(17);
  for (int t = 1; t <= horizon_; ++t)
    for (int s = 0; s < states_; ++s)
      for (int a = 0; a < decisions_; ++a)
        for (int b = 0; b < decisions_; ++b) {
          const int k = basis_index(s, static_cast<Decision>(a), static_cast<Decision>(b));
          out << t << ',' << k << ',' << s << ',' << a << ',' << b << ',' << value(t, k) << ',' << pu_value(t, k)
              << ',' << decision(t, k) << '\n';
        }
}

Decision decide_online(const PlanTable& plan, int t, const Eigen::VectorXd& q, Decision da, Decision db,
                       std::mt19937_64& rng) {
  if (q.size() != plan.state_count()) throw ContractViolation("decide_online: belief size mismatch");
  const double total = q.sum();
  if (!(std::abs(total - 1.0) <= kSumTolerance) || (q.array() < 0.0).any())
    throw NumericalError("decide_online: time-sharing coefficients do not form a distribution");
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  int pick = -1;
  for (int s = 0; s < q.size(); ++s) {
    if (q(s) <= 0.0) continue;
    pick = s;
    acc += q(s);
    if (u < acc) break;
  }
  return plan.decision(t, plan.basis_index(pick, da, db));
}

EpisodeResult run_episode(const net::Network& net, const net::TransitionModel& model, const PlanTable& plan,
                          const EpisodeOptions& options) {
  if (options.horizon > plan.horizon()) throw ContractViolation("run_episode: horizon exceeds the plan");
  EpisodeStreams streams(options.seed, options.run);
  const auto& space = model.states();
  net::SystemState s = space.warmup_state();
  Eigen::VectorXd q2 = Eigen::VectorXd::Zero(space.size());  // posterior of the state two slots back
  q2(space.index(s)) = 1.0;
  Eigen::VectorXd q1 = model.matrix(0).transpose() * q2;  // slot 0 carries no measurement
  for (int k = 0; k < 2; ++k) s = net::simulate_slot(net, s, 0, streams.environment).next;

  EpisodeResult out;
  Decision d2 = 0, d1 = 0;
  for (int t = 1; t <= options.horizon; ++t) {
    const Decision d = decide_online(plan, t, q2, d2, d1, streams.policy);
    const Decision eff = net::effective_decision(s, d);
    const Eigen::VectorXd y = net::observe_all(net, s, eff, streams.sensing);
    const auto r = net::simulate_slot(net, s, eff, streams.environment);
    out.pu_bits += r.pu_bits;
    out.su_bits += r.su_bits;
    out.su_attempts += std::popcount(eff);
    ++out.slots;
    if (options.record_trace) out.trace.push_back({t, s.pu, d, eff, r.pu_bits, r.su_bits});
    Eigen::VectorXd q0 = belief_update(net, model, q1, d1, y, d);
    q2 = std::move(q1);
    q1 = std::move(q0);
    d2 = d1;
    d1 = d;
    s = r.next;
  }
  return out;
}

}  // namespace uwcog::central
