#pragma once

// Centralised scheduling (CCTS): belief tracking with two-slot information delay,
// value iteration over basis beliefs with per-slot PU constraints, and online
// time-sharing decisions.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "uwcog/episode.hpp"
#include "uwcog/netmodel.hpp"

namespace uwcog::central {

using net::Decision;

/// Bayes filter step: predict with P(transition) from `belief`, then weight each state by
/// the Gaussian likelihood of `y` given that state and the SUs' slot decision `observed`.
/// Falls back to the prediction when every likelihood underflows.
Eigen::VectorXd belief_update(const net::Network& net, const net::TransitionModel& model,
                              const Eigen::VectorXd& belief, Decision transition,
                              const Eigen::VectorXd& y, Decision observed);

/// Expected PU bits from slot t to the horizon under the silent policy, per starting state:
/// h_t = g_P(0) + P(0) h_{t+1}, h_{T+1} = 0.
class SilentBaseline {
public:
  SilentBaseline(const net::TransitionModel& model, int horizon);

  int horizon() const { return horizon_; }
  const Eigen::VectorXd& reward_to_go(int t) const;  // t in [1, T+1]
  /// Expected silent-policy PU bits from slot t on, starting from the slot-1 distribution.
  double value(int t) const;

private:
  int horizon_;
  std::vector<Eigen::VectorXd> h_;
  std::vector<double> value_;
};

struct PlanOptions {
  int horizon = 300;
  double beta = 0.8;
};

/// Value iteration result over basis beliefs v(s, da, db) = e_s P(da) P(db), where s is the
/// state two slots back and da, db the two decisions taken since.
class PlanTable {
public:
  PlanTable(const net::TransitionModel& model, const PlanOptions& options);

  int horizon() const { return horizon_; }
  double beta() const { return beta_; }
  int state_count() const { return states_; }
  int decision_count() const { return decisions_; }
  int basis_count() const { return states_ * decisions_ * decisions_; }
  int basis_index(int state, Decision da, Decision db) const {
    return (state * decisions_ + static_cast<int>(da)) * decisions_ + static_cast<int>(db);
  }

  double value(int t, int basis) const { return value_[at(t, basis)]; }
  double pu_value(int t, int basis) const { return pu_value_[at(t, basis)]; }
  Decision decision(int t, int basis) const { return decision_[at(t, basis)]; }
  /// Bit k set when decision k satisfies the slot constraint at (t, basis).
  std::uint64_t feasible(int t, int basis) const { return feasible_[at(t, basis)]; }
  /// Silent-policy PU bits from slot t for this basis belief; the constraint is
  /// pu_value(t, v | decision) >= beta * baseline(t, v).
  double baseline(int t, int basis) const { return baseline_[at(t, basis)]; }

  const SilentBaseline& silent() const { return silent_; }
  /// Upper bound for an arbitrary belief over (s_{t-2}) with known decisions: sum_s q_s V_t(s, da, db).
  double bound(int t, const Eigen::VectorXd& q, Decision da, Decision db) const;

  /// CSV rows: slot,basis,state,decision_a,decision_b,value,pu_value,decision
  void write_csv(std::ostream& out) const;

private:
  std::size_t at(int t, int basis) const;

  int horizon_;
  double beta_;
  int states_;
  int decisions_;
  SilentBaseline silent_;
  std::vector<double> value_, pu_value_, baseline_;
  std::vector<Decision> decision_;
  std::vector<std::uint64_t> feasible_;
};

/// Samples s ~ q and returns the stored decision for basis (s, da, db).
Decision decide_online(const PlanTable& plan, int t, const Eigen::VectorXd& q, Decision da, Decision db,
                       std::mt19937_64& rng);

EpisodeResult run_episode(const net::Network& net, const net::TransitionModel& model, const PlanTable& plan,
                          const EpisodeOptions& options);

}  // namespace uwcog::central
