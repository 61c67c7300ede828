#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "support/fixtures.hpp"
#include "uwcog/baselines.hpp"
#include "uwcog/errors.hpp"

using namespace uwcog;
using namespace uwcog::net;
using namespace uwcog::baselines;

namespace {

const Network& crossing_net() {
  static const Network n(testing::crossing_spec());
  return n;
}

Eigen::VectorXd random_belief(int size, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd v(size);
  for (int k = 0; k < size; ++k) v(k) = e(rng);
  return v / v.sum();
}

// Composite Simpson rule on the linear PSD, df in Hz.
double simpson_noise(const channel::Band& band, const channel::AcousticEnvironment& env, int panels) {
  const double h = band.bandwidth_khz / panels;
  double acc = channel::noise_psd(band.low_khz(), env).total_linear + channel::noise_psd(band.high_khz(), env).total_linear;
  for (int k = 1; k < panels; ++k) acc += (k % 2 ? 4.0 : 2.0) * channel::noise_psd(band.low_khz() + k * h, env).total_linear;
  return acc * h / 3.0 * 1e3;
}

}  // namespace

TEST_CASE("C-TDM decision rule") {
  const Network& net = crossing_net();
  const decentral::LocalModel m(net, 2);
  std::mt19937_64 rng(3);
  int idle = -1, busy = -1;
  for (int k = 0; k < m.size(); ++k) {
    if (m.state(k).pu == 0u && idle < 0) idle = k;
    if (m.state(k).pu != 0u && busy < 0) busy = k;
  }
  REQUIRE(idle >= 0);
  REQUIRE(busy >= 0);
  const Eigen::VectorXd certain_idle = Eigen::VectorXd::Unit(m.size(), idle);
  CHECK(occupancy(m, certain_idle) == 0.0);
  for (int k = 0; k < 20; ++k) CHECK(ctdm_decide(m, certain_idle, 0.0, rng) == 1);

  Eigen::VectorXd mixed = Eigen::VectorXd::Zero(m.size());
  mixed(idle) = 0.4;
  mixed(busy) = 0.6;
  CHECK(occupancy(m, mixed) == doctest::Approx(0.6));
  for (int k = 0; k < 20; ++k) CHECK(ctdm_decide(m, mixed, 0.0, rng) == 0);
  mixed(idle) = 0.5;
  mixed(busy) = 0.5;
  CHECK(ctdm_decide(m, mixed, 0.0, rng) == 1);

  // transmit rate on an idle belief is the Bernoulli gate 1 - beta_bar
  const double beta_bar = decentral::local_beta(0.8, 4);
  const int n = 100000;
  int sent = 0;
  for (int k = 0; k < n; ++k) sent += ctdm_decide(m, certain_idle, beta_bar, rng);
  const double p = 1.0 - beta_bar, sd = std::sqrt(n * p * (1.0 - p));
  CHECK(std::abs(sent - n * p) <= 3.0 * sd);
  CHECK_THROWS_AS(occupancy(m, Eigen::VectorXd::Ones(2)), ContractViolation);
}

TEST_CASE("band plan") {
  const auto plan = BandPlan::three_channel();
  const channel::Band total{32.0, 4.0};
  CHECK_NOTHROW(plan.validate(total, 4, 4));
  for (int j = 1; j <= 4; ++j) {
    CHECK(plan.pu_channel(j) == (j - 1) % 3);
    CHECK(plan.su_channel(j) == (j - 1) % 3);
  }
  // channels and guards span exactly 30..34 kHz
  CHECK(plan.channels.front().low_khz() == doctest::Approx(30.0));
  CHECK(plan.channels.back().high_khz() == doctest::Approx(34.0));
  for (std::size_t k = 1; k < plan.channels.size(); ++k)
    CHECK(plan.channels[k].low_khz() - plan.channels[k - 1].high_khz() == doctest::Approx(plan.guard_khz));

  auto bad = plan;
  bad.su_assignment = {0, 1, 0, 2};
  CHECK_THROWS_AS(bad.validate(total, 4, 4), ConfigError);
  bad = plan;
  bad.pu_assignment = {0, 1, 2};
  CHECK_THROWS_AS(bad.validate(total, 4, 4), ConfigError);
  bad = plan;
  bad.guard_khz = 0.3;
  CHECK_THROWS_AS(bad.validate(total, 4, 4), ConfigError);
  bad = plan;
  bad.channels[2].center_khz = 34.0;
  CHECK_THROWS_AS(bad.validate(total, 4, 4), ConfigError);
  bad = plan;
  bad.pu_assignment = {0, 1, 2, 5};
  CHECK_THROWS_AS(bad.validate(total, 4, 4), ConfigError);
  try {
    bad = plan;
    bad.guard_khz = 0.3;
    bad.su_assignment = {0, 0, 1, 2};
    bad.validate(total, 4, 4);
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(e.issues().size() >= 2);
  }
  CHECK_NOTHROW(BandPlan::single(total, 10000.0).validate(total, 4, 4));
}

TEST_CASE("FDM scenario variant") {
  const NetworkSpec spec = testing::crossing_spec();
  const auto plan = BandPlan::three_channel();
  const Network fdm(build_fdm_model(spec, plan));
  const double slot = spec.slot_length_s;
  CHECK(fdm.spec().pu_packet_bits <= slot * 3000.0);
  for (const auto& l : fdm.links()) {
    CAPTURE(l.hop);
    CHECK(l.channel.bit_rate_bps == 3000.0);
    // whole bytes, at most (3 s * 3 kbps) / 8 = 1125 bytes, and the packet ends inside the slot
    CHECK(std::fmod(l.packet_bits, 8.0) == 0.0);
    CHECK(l.packet_bits / 8.0 <= 1125.0);
    CHECK(l.length() / spec.env.sound_speed + l.duration_s() <= slot + 1e-9);
    CHECK(l.length() / spec.env.sound_speed + (l.packet_bits + 8.0) / 3000.0 > slot);
    // in-band noise at the sub-channel centre frequencies
    const auto& band = l.channel.band;
    CHECK((band.center_khz == 30.6 || band.center_khz == 32.0 || band.center_khz == 33.4));
    CHECK(l.noise_power == doctest::Approx(simpson_noise(band, spec.env, 2000)).epsilon(1e-6));
  }
  // no channel shared by three consecutive nodes of a chain
  for (int j = 1; j + 1 <= fdm.pu_hops(); ++j)
    for (int k = j + 1; k <= std::min(j + 2, fdm.pu_hops()); ++k)
      CHECK(fdm.link(fdm.pu_link(j)).channel.channel != fdm.link(fdm.pu_link(k)).channel.channel);
  for (int j = 1; j + 1 <= fdm.su_hops(); ++j)
    for (int k = j + 1; k <= std::min(j + 2, fdm.su_hops()); ++k)
      CHECK(fdm.link(fdm.su_link(j)).channel.channel != fdm.link(fdm.su_link(k)).channel.channel);

  // a single full-band channel is the TDM scenario
  const Network tdm(spec);
  const Network one(build_fdm_model(spec, BandPlan::single(spec.band, spec.bit_rate_bps)));
  REQUIRE(one.link_count() == tdm.link_count());
  for (int l = 0; l < tdm.link_count(); ++l) {
    CHECK(one.link(l).packet_bits == tdm.link(l).packet_bits);
    CHECK(one.link(l).noise_power == tdm.link(l).noise_power);
    for (LinkMask mask = 0; mask < (1u << tdm.link_count()); mask += 7)
      if (mask >> l & 1u) CHECK(one.loss(l, mask) == tdm.loss(l, mask));
  }
}

TEST_CASE("C-FDM channel occupancy matches direct marginalisation") {
  const NetworkSpec spec = testing::crossing_spec();
  const auto plan = BandPlan::three_channel();
  const Network fdm(build_fdm_model(spec, plan));
  std::mt19937_64 rng(9);
  for (int i = 1; i <= fdm.su_hops(); ++i) {
    const decentral::LocalModel m(fdm, i);
    CAPTURE(i);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd w = random_belief(m.size(), rng);
      double direct = 0.0;
      for (int k = 0; k < m.size(); ++k) {
        bool busy = false;
        for (std::size_t h = 0; h < m.neighbours().size(); ++h)
          if ((m.state(k).pu >> h & 1u) && plan.pu_channel(m.neighbours()[h]) == plan.su_channel(i)) busy = true;
        if (busy) direct += w(k);
      }
      CHECK(channel_occupancy(m, fdm, w) == doctest::Approx(direct).epsilon(1e-14));
      CHECK(channel_occupancy(m, fdm, w) <= occupancy(m, w) + 1e-15);
    }
    // certain states
    for (int k = 0; k < m.size(); ++k) {
      const Eigen::VectorXd e = Eigen::VectorXd::Unit(m.size(), k);
      const double occ = channel_occupancy(m, fdm, e);
      CHECK((occ == 0.0 || occ == 1.0));
      if (occ == 1.0) CHECK(cfdm_decide(m, fdm, e, 0.0, rng) == 0);
      else CHECK(cfdm_decide(m, fdm, e, 0.0, rng) == 1);
    }
  }
}

TEST_CASE("interference alignment") {
  const Network& net = crossing_net();
  std::mt19937_64 rng(1);
  IaOptions always;
  always.access_probability = 1.0;
  // nothing scheduled: transmit in every slot outside the overhead
  for (int i = 1; i <= net.su_hops(); ++i) {
    CHECK(ia_clear(net, i, 0u));
    for (long t = 1; t <= 60; ++t) CHECK(ia_schedule(net, i, t, 0u, always, rng) == ((t - 1) % 30 == 0 ? 0 : 1));
  }
  // a fully loaded schedule silences every SU whose packet reaches some PU receiver
  const std::uint32_t all = (1u << net.pu_hops()) - 1u;
  int blocked = 0;
  for (int i = 1; i <= net.su_hops(); ++i) {
    bool reaches = false;
    for (int j = 1; j <= net.pu_hops(); ++j)
      if (!net.overlap().at(net.su_link(i), net.pu_link(j)).empty()) reaches = true;
    if (reaches) {
      ++blocked;
      for (long t = 2; t <= 30; ++t) CHECK(ia_schedule(net, i, t, all, always, rng) == 0);
    }
  }
  CHECK(blocked > 0);

  // episode audit against the arrival windows: no SU packet overlaps a PU reception
  EpisodeOptions o;
  o.record_trace = true;
  long su_slots = 0;
  for (std::uint64_t run = 0; run < 20; ++run) {
    o.run = run;
    const auto e = run_ia(net, IaOptions{}, o);
    for (const auto& row : e.trace) {
      if ((row.slot - 1) % 30 == 0) CHECK(row.decision == 0u);
      for (int i = 1; i <= net.su_hops(); ++i) {
        if (!(row.effective >> (i - 1) & 1u)) continue;
        ++su_slots;
        for (int j = 1; j <= net.pu_hops(); ++j) {
          if (!(row.pu >> (j - 1) & 1u)) continue;
          const auto d = desired_window(net, net.pu_link(j));
          const auto w = interferer_window(net, net.su_link(i), net.pu_link(j));
          CHECK(std::min(d.end_s, w.end_s) - std::max(d.start_s, w.start_s) <= 1e-9);
        }
      }
    }
  }
  CHECK(su_slots > 0);
  IaOptions broken;
  broken.overhead_slots = 30;
  CHECK_THROWS_AS(ia_schedule(net, 1, 1, 0u, broken, rng), ConfigError);
  CHECK_THROWS_AS(ia_clear(net, 9, 0u), ContractViolation);
}

TEST_CASE("silent and gated runs share the environment draws") {
  const auto spec = testing::crossing_spec();
  const auto never = plan_ctdm(spec, 1.0);
  CHECK(never.beta_bar == 1.0);
  EpisodeOptions o;
  o.record_trace = true;
  for (std::uint64_t run = 0; run < 5; ++run) {
    o.run = run;
    const auto silent = run_silent(never.net, o);
    const auto gated = run_ctdm(never, o);
    CHECK(silent.su_bits == 0.0);
    CHECK(gated.su_attempts == 0);
    CHECK(gated.pu_bits == silent.pu_bits);
    for (std::size_t k = 0; k < silent.trace.size(); ++k) CHECK(gated.trace[k].pu == silent.trace[k].pu);
  }
}

TEST_CASE("C-TDM and C-FDM episodes") {
  const auto spec = testing::crossing_spec();
  const auto ctdm = plan_ctdm(spec, 0.8);
  const auto cfdm = plan_cfdm(spec, BandPlan::three_channel(), 0.8);
  CHECK(ctdm.reuse == 3);
  CHECK(cfdm.reuse == 0);
  EpisodeOptions o;
  o.record_trace = true;
  long attempts = 0;
  for (std::uint64_t run = 0; run < 10; ++run) {
    o.run = run;
    const auto e = run_ctdm(ctdm, o);
    attempts += e.su_attempts;
    for (const auto& row : e.trace)
      for (int i = 0; i < 4; ++i)
        if (row.decision >> i & 1u) CHECK(row.slot % 3 == (i + 1) % 3);
    const auto f = run_cfdm(cfdm, o);
    CHECK(f.slots == 300);
    CHECK(run_cfdm(cfdm, o).su_bits == f.su_bits);
  }
  CHECK(attempts > 0);
  const auto dfdm = plan_dcts_fdm(spec, BandPlan::three_channel(), {300, 0.8, 3, false, 1.0});
  for (const auto& p : dfdm.plans) CHECK(p.reuse() == 0);
  CHECK(dfdm.net.link(dfdm.net.su_link(1)).channel.bit_rate_bps == 3000.0);
}
