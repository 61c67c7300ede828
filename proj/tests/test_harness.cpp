#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "uwcog/baselines.hpp"
#include "uwcog/config.hpp"
#include "uwcog/errors.hpp"
#include "uwcog/experiment.hpp"
#include "uwcog/planner_decentral.hpp"

using namespace uwcog;
using namespace uwcog::harness;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(UWCOG_SOURCE_DIR) / "configs";

nlohmann::json base_json() {
  return nlohmann::json::parse(R"({
    "name": "t",
    "topology": {"layout": "crossing", "end_to_end_m": 10000, "pu_hops": 4, "su_hops": 4,
                 "su_offset_m": -2700, "node_depth_m": 50},
    "band": {"center_khz": 32, "bandwidth_khz": 4},
    "traffic": {"alpha1": 0.05, "alpha2": 0.2},
    "beta": 0.8,
    "experiment": {"horizon": 60, "runs": 4, "base_seed": 7, "schemes": ["dcts", "ctdm"]}
  })");
}

std::vector<std::string> issues_of(const nlohmann::json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.issues();
  }
  return {};
}

bool mentions(const std::vector<std::string>& issues, const std::string& text) {
  for (const auto& s : issues)
    if (s.find(text) != std::string::npos) return true;
  return false;
}

// Sample mean and standard error in long double.
std::pair<long double, long double> mean_se(const std::vector<double>& xs) {
  long double m = 0;
  for (double x : xs) m += x;
  m /= xs.size();
  long double v = 0;
  for (double x : xs) v += (x - m) * (x - m);
  v /= (xs.size() - 1);
  return {m, std::sqrt(v / xs.size())};
}

std::string csv_of(const SweepTable& t) {
  std::ostringstream a;
  write_results_csv(a, t);
  write_long_csv(a, t);
  write_runs_csv(a, t);
  return a.str();
}

}  // namespace

TEST_CASE("scheme names") {
  for (Scheme s : {Scheme::ccts, Scheme::dcts, Scheme::ctdm, Scheme::ia, Scheme::cfdm, Scheme::dcts_fdm, Scheme::silent})
    CHECK(parse_scheme(scheme_name(s)) == s);
  CHECK(scheme_name(Scheme::dcts_fdm) == "dcts-fdm");
  CHECK(uses_fdm(Scheme::cfdm));
  CHECK(uses_fdm(Scheme::dcts_fdm));
  CHECK_FALSE(uses_fdm(Scheme::dcts));
  CHECK_THROWS_AS(parse_scheme("tdma"), ConfigError);
}

TEST_CASE("shipped configs load and validate") {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(kConfigs)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    ScenarioConfig cfg;
    CHECK_NOTHROW(cfg = load_config(entry.path()));
    CHECK_NOTHROW(validate(cfg));
    for (double v : cfg.sweep_values) CHECK_NOTHROW(with_axis(cfg, cfg.sweep_axis, v));
    ++count;
  }
  CHECK(count >= 8);

  const ScenarioConfig cfg = load_config(kConfigs / "paper_4x4.json");
  CHECK(cfg.network.topology.pu_hops() == 4);
  CHECK(cfg.network.topology.su_hops() == 4);
  CHECK(cfg.network.band.center_khz == 32.0);
  CHECK(cfg.beta == 0.8);
  CHECK(cfg.horizon == 300);
  CHECK(cfg.runs == 30);
  const ScenarioConfig big = paper_scale(cfg);
  CHECK(big.horizon == 1000);
  CHECK(big.runs == 100);
}

TEST_CASE("config rejects bad scenarios") {
  SUBCASE("alpha1 == alpha2") {
    auto j = base_json();
    j["traffic"]["alpha1"] = 0.2;
    CHECK(mentions(issues_of(j), "traffic"));
  }
  SUBCASE("FDM scheme without band plan") {
    auto j = base_json();
    j["experiment"]["schemes"] = {"dcts-fdm"};
    CHECK(mentions(issues_of(j), "band_plan"));
  }
  SUBCASE("every problem is listed") {
    auto j = base_json();
    j["beta"] = 1.5;
    j["traffic"]["alpha2"] = 0.01;
    j["experiment"]["runs"] = 0;
    j["colour"] = "blue";
    const auto issues = issues_of(j);
    CHECK(issues.size() >= 4);
    CHECK(mentions(issues, "beta"));
    CHECK(mentions(issues, "traffic"));
    CHECK(mentions(issues, "runs"));
    CHECK(mentions(issues, "colour"));
  }
  SUBCASE("wrong types and unknown schemes") {
    auto j = base_json();
    j["topology"]["pu_hops"] = "four";
    j["experiment"]["schemes"] = {"dcts", "aloha"};
    const auto issues = issues_of(j);
    CHECK(mentions(issues, "topology.pu_hops"));
    CHECK(mentions(issues, "aloha"));
  }
  SUBCASE("explicit layout needs node lists") {
    auto j = base_json();
    j["topology"] = {{"layout", "explicit"}};
    CHECK_FALSE(issues_of(j).empty());
  }
  SUBCASE("beta = 1 is allowed") {
    auto j = base_json();
    j["beta"] = 1.0;
    CHECK(issues_of(j).empty());
  }
  CHECK_THROWS_AS(load_config(kConfigs / "missing.json"), ConfigError);
}

TEST_CASE("sweep axes edit the scenario") {
  auto j = base_json();
  j["sweep"] = {{"axis", "alpha2"}, {"values", {0.4}}, {"alpha1_ratio", 0.25}};
  j["band_plan"] = nlohmann::json::parse(R"({"channels": [{"center_khz": 30.6, "bandwidth_khz": 1.2},
      {"center_khz": 32, "bandwidth_khz": 1.2}, {"center_khz": 33.4, "bandwidth_khz": 1.2}]})");
  const ScenarioConfig cfg = parse_config(j);

  const auto a = with_axis(cfg, "alpha2", 0.4);
  CHECK(a.network.traffic.alpha2 == 0.4);
  CHECK(a.network.traffic.alpha1 == doctest::Approx(0.1).epsilon(1e-15));

  const auto f = with_axis(cfg, "fc", 28.0);
  CHECK(f.network.band.center_khz == 28.0);
  CHECK(f.band_plan->channels[0].center_khz == doctest::Approx(26.6).epsilon(1e-12));
  CHECK(f.band_plan->channels[2].center_khz == doctest::Approx(29.4).epsilon(1e-12));

  const auto d = with_axis(cfg, "distance", 12000.0);
  CHECK(d.crossing->end_to_end_m == 12000.0);
  CHECK(d.crossing->su_offset_m == doctest::Approx(-2700.0 * 1.2).epsilon(1e-12));
  CHECK(d.network.slot_length_s == doctest::Approx(3.0 + 500.0 / d.network.env.sound_speed).epsilon(1e-12));
  CHECK(d.network.topology.pu_nodes.back().x() - d.network.topology.pu_nodes.front().x() ==
        doctest::Approx(12000.0));

  CHECK(with_axis(cfg, "packets", 1.0).optimize_packets);
  CHECK(with_axis(cfg, "beta", 0.6).beta == 0.6);
  CHECK(*with_axis(cfg, "sigma_n", 2.0).network.sensing_sigma == 2.0);
  CHECK(with_axis(cfg, "offset", -3000.0).crossing->su_offset_m == -3000.0);
  CHECK_THROWS_AS(with_axis(cfg, "gamma", 1.0), ConfigError);
  CHECK_THROWS_AS(with_axis(cfg, "beta", 1.5), ConfigError);
  for (const auto& axis : sweep_axes()) CHECK_NOTHROW((void)axis);
}

TEST_CASE("statistics and metrics") {
  const std::vector<double> xs{3.0, 7.5, 1.25, 9.0, 4.0};
  const auto s = summarize(xs);
  const auto [m, se] = mean_se(xs);
  CHECK(s.n == 5);
  CHECK(s.mean == doctest::Approx(static_cast<double>(m)).epsilon(1e-14));
  CHECK(s.se == doctest::Approx(static_cast<double>(se)).epsilon(1e-14));
  CHECK(summarize({2.0}).se == 0.0);

  std::vector<RunRecord> runs;
  for (int k = 0; k < 6; ++k) runs.push_back({k, 1u + k, 1000.0 + 100.0 * k, 40.0 * k * k, 1200.0 + 50.0 * k});
  const int T = 50;
  const double slot = 3.0, band = 4000.0, beta = 0.8;
  const auto r = compute_metrics(runs, T, slot, band, beta);

  std::vector<double> total, eff, margin;
  for (const auto& x : runs) {
    total.push_back(x.pu_bits + x.su_bits);
    eff.push_back((x.pu_bits + x.su_bits) / (T * slot * band));
    margin.push_back(x.pu_bits - beta * x.silent_pu_bits);
  }
  CHECK(r.total_bits.mean == doctest::Approx(static_cast<double>(mean_se(total).first)));
  CHECK(r.total_bits.mean == doctest::Approx(r.pu_bits.mean + r.su_bits.mean));
  CHECK(r.spectral_efficiency.mean == doctest::Approx(static_cast<double>(mean_se(eff).first)));
  CHECK(r.spectral_efficiency.se == doctest::Approx(static_cast<double>(mean_se(eff).second)));
  CHECK(r.constraint_margin.mean == doctest::Approx(static_cast<double>(mean_se(margin).first)));
  CHECK(r.total_per_slot.mean == doctest::Approx(r.total_bits.mean / T));
  CHECK(r.pu_ratio == doctest::Approx(r.pu_bits.mean / r.silent_pu_bits.mean));

  SUBCASE("duplicated runs keep the mean and shrink the error") {
    auto twice = runs;
    twice.insert(twice.end(), runs.begin(), runs.end());
    const auto d = compute_metrics(twice, T, slot, band, beta);
    const double n = static_cast<double>(runs.size());
    CHECK(d.total_bits.mean == doctest::Approx(r.total_bits.mean));
    // exact sample-variance factor; tends to 1/sqrt(2) as n grows
    CHECK(d.total_bits.se == doctest::Approx(r.total_bits.se * std::sqrt((n - 1) / (2 * n - 1))));
    CHECK(d.total_bits.se < r.total_bits.se);
  }
  SUBCASE("silent runs") {
    std::vector<RunRecord> silent;
    for (int k = 0; k < 4; ++k) silent.push_back({k, 1u + k, 900.0 + k, 0.0, 900.0 + k});
    const auto q = compute_metrics(silent, T, slot, band, beta);
    CHECK(q.su_bits.mean == 0.0);
    CHECK(q.pu_ratio == 1.0);
  }
  CHECK_THROWS_AS(compute_metrics({}, T, slot, band, beta), ContractViolation);
}

TEST_CASE("silent scheme through the harness") {
  auto cfg = parse_config(base_json());
  cfg.schemes = {Scheme::silent};
  const auto t = run_sweep(cfg, "", {}, cfg.schemes);
  REQUIRE(t.rows.size() == 1);
  const auto& m = t.rows[0].metrics;
  CHECK(m.su_bits.mean == 0.0);
  CHECK(m.pu_ratio == 1.0);
  CHECK(m.pu_bits.n == cfg.runs);
  for (const auto& r : t.rows[0].runs) CHECK(r.pu_bits == r.silent_pu_bits);
}

TEST_CASE("degenerate sweep equals a direct episode") {
  auto cfg = parse_config(base_json());
  cfg.runs = 1;
  for (Scheme s : {Scheme::dcts, Scheme::ctdm}) {
    CAPTURE(scheme_name(s));
    const auto t = run_sweep(cfg, "beta", {0.8}, {s});
    REQUIRE(t.rows.size() == 1);
    const auto& rec = t.rows[0].runs.at(0);
    CHECK(rec.seed == cfg.base_seed);

    EpisodeOptions o;
    o.horizon = cfg.horizon;
    o.seed = cfg.base_seed;
    EpisodeResult direct;
    if (s == Scheme::dcts) {
      decentral::DctsOptions d;
      d.horizon = cfg.horizon;
      d.beta = 0.8;
      d.optimize_packets = false;
      direct = decentral::run_episode(decentral::plan_dcts(cfg.network, d), o);
    } else {
      direct = baselines::run_ctdm(baselines::plan_ctdm(cfg.network, 0.8, 1.0), o);
    }
    CHECK(rec.pu_bits == direct.pu_bits);
    CHECK(rec.su_bits == direct.su_bits);
    CHECK(rec.silent_pu_bits == baselines::run_silent(net::Network(cfg.network), o).pu_bits);
  }
}

TEST_CASE("results are identical across thread counts") {
  auto cfg = parse_config(base_json());
  cfg.runs = 6;
  cfg.threads = 1;
  const auto one = csv_of(run_sweep(cfg, "beta", {0.7, 0.9}, cfg.schemes));
  cfg.threads = 4;
  const auto four = csv_of(run_sweep(cfg, "beta", {0.7, 0.9}, cfg.schemes));
  CHECK(one == four);
  CHECK(csv_of(run_sweep(cfg, "beta", {0.7, 0.9}, cfg.schemes)) == four);
  cfg.base_seed += 1;
  CHECK(csv_of(run_sweep(cfg, "beta", {0.7, 0.9}, cfg.schemes)) != four);
}

TEST_CASE("sweep errors carry their context") {
  auto cfg = parse_config(base_json());
  try {
    run_sweep(cfg, "beta", {0.8, 1.5}, {Scheme::dcts});
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("beta=1.5") != std::string::npos);
  }
}

TEST_CASE("CSV export") {
  SUBCASE("empty table is header only") {
    SweepTable t{"alpha2", {}};
    std::ostringstream os;
    write_results_csv(os, t);
    const std::string s = os.str();
    CHECK(s.rfind("alpha2,scheme,n,pu_bits_mean,pu_bits_se,", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 1);
  }
  SUBCASE("round trip") {
    auto cfg = parse_config(base_json());
    cfg.runs = 3;
    const auto t = run_sweep(cfg, "alpha2", {0.3, 0.5}, cfg.schemes);
    std::ostringstream os;
    write_results_csv(os, t);
    std::istringstream is(os.str());
    const auto back = read_results_csv(is);
    CHECK(back.axis == "alpha2");
    REQUIRE(back.rows.size() == t.rows.size());
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
      CHECK(back.rows[k].value == t.rows[k].value);
      CHECK(back.rows[k].scheme == t.rows[k].scheme);
      CHECK(back.rows[k].metrics.total_bits.mean == t.rows[k].metrics.total_bits.mean);
      CHECK(back.rows[k].metrics.total_bits.se == t.rows[k].metrics.total_bits.se);
      CHECK(back.rows[k].metrics.spectral_efficiency.mean == t.rows[k].metrics.spectral_efficiency.mean);
      CHECK(back.rows[k].metrics.constraint_margin.n == 3);
      CHECK(back.rows[k].metrics.pu_ratio == t.rows[k].metrics.pu_ratio);
    }
    std::ostringstream again;
    write_results_csv(again, back);
    CHECK(again.str() == os.str());
  }
  SUBCASE("malformed input") {
    std::istringstream is("beta,scheme,n\n0.5,dcts,x\n");
    CHECK_THROWS_AS(read_results_csv(is), ConfigError);
  }
}
