#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "uwcog/channel.hpp"

using namespace uwcog::channel;

namespace {

// Independent evaluation in extended precision.
long double thorp_ld(long double f) {
  const long double f2 = f * f;
  return 0.11L * f2 / (1.0L + f2) + 44.0L * f2 / (4100.0L + f2) + 2.75e-4L * f2 + 0.003L;
}

double trapezoid_noise(const Band& band, const AcousticEnvironment& env, int n) {
  const double h = band.bandwidth_khz / n;
  double acc = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double w = (k == 0 || k == n) ? 0.5 : 1.0;
    acc += w * noise_psd(band.low_khz() + k * h, env).total_linear;
  }
  return acc * h * 1e3;
}

}  // namespace

TEST_CASE("absorption matches frozen values") {
  CHECK(absorption_db_per_km(1e-9) == doctest::Approx(0.003).epsilon(1e-12));
  CHECK(absorption_db_per_km(1.0) == doctest::Approx(0.0690040904657400).epsilon(1e-12));
  CHECK(absorption_db_per_km(10.0) == doctest::Approx(1.18702993870816).epsilon(1e-12));
  CHECK(absorption_db_per_km(32.0) == doctest::Approx(static_cast<double>(thorp_ld(32.0L))).epsilon(1e-13));
  CHECK_THROWS_AS(absorption_db_per_km(0.0), std::domain_error);
  CHECK_THROWS_AS(absorption_db_per_km(-3.0), std::domain_error);
}

TEST_CASE("absorption is strictly increasing") {
  double prev = absorption_db_per_km(0.01);
  for (double f = 0.02; f < 200.0; f += 0.37) {
    const double cur = absorption_db_per_km(f);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("attenuation") {
  AcousticEnvironment env;
  env.spreading_factor = 1.5;
  SUBCASE("unit distance keeps only the absorption term") {
    CHECK(attenuation_db(1.0, 20.0, env) == doctest::Approx(absorption_db_per_km(20.0) / 1000.0).epsilon(1e-12));
  }
  SUBCASE("2.5 km at 32 kHz") {
    CHECK(attenuation_db(2500.0, 32.0, env) == doctest::Approx(73.9381577546498).epsilon(1e-12));
  }
  SUBCASE("normalizing constant is an additive offset") {
    AcousticEnvironment e2 = env;
    e2.normalizing_constant = 2.0;
    CHECK(attenuation_db(2500.0, 32.0, e2) - attenuation_db(2500.0, 32.0, env) ==
          doctest::Approx(10.0 * std::log10(2.0)).epsilon(1e-12));
  }
  SUBCASE("monotone in distance and frequency") {
    CHECK(attenuation_db(2500.0, 33.4, env) > attenuation_db(2500.0, 30.6, env));
    for (double d = 100.0; d < 20000.0; d += 731.0)
      for (double f = 1.0; f < 60.0; f += 3.3) {
        CHECK(attenuation_db(d + 50.0, f, env) > attenuation_db(d, f, env));
        CHECK(attenuation_db(d, f + 0.5, env) > attenuation_db(d, f, env));
      }
  }
  CHECK_THROWS_AS(attenuation_db(0.0, 32.0, env), std::domain_error);
  CHECK_THROWS_AS(attenuation_db(-5.0, 32.0, env), std::domain_error);
}

TEST_CASE("noise components") {
  AcousticEnvironment env;
  env.shipping_activity = 0.5;
  env.wind_speed = 0.0;
  const auto n = noise_psd(10.0, env);
  CHECK(n.turbulence_db == doctest::Approx(-13.0).epsilon(1e-12));
  CHECK(n.shipping_db == doctest::Approx(5.92194401877491).epsilon(1e-12));
  CHECK(n.wind_db == doctest::Approx(29.3186664280488).epsilon(1e-12));
  CHECK(n.thermal_db == doctest::Approx(5.0).epsilon(1e-12));
  const double lin = std::pow(10.0, -1.3) + std::pow(10.0, 0.592194401877491) +
                     std::pow(10.0, 2.93186664280488) + std::pow(10.0, 0.5);
  CHECK(n.total_linear == doctest::Approx(lin).epsilon(1e-12));

  AcousticEnvironment windy = env;
  windy.wind_speed = 5.0;
  const auto w = noise_psd(10.0, windy);
  CHECK(w.wind_db > n.wind_db);
  CHECK(w.turbulence_db == n.turbulence_db);
  CHECK(w.shipping_db == n.shipping_db);
  CHECK(w.thermal_db == n.thermal_db);
  CHECK_THROWS_AS(noise_psd(0.0, env), std::domain_error);
}

TEST_CASE("in-band noise against a finer trapezoid") {
  AcousticEnvironment env;
  const Band band{32.0, 4.0};
  const double coarse = in_band_noise_power(band, env);
  const double fine = trapezoid_noise(band, env, 4000);
  CHECK(std::abs(coarse - fine) / fine < 1e-4);
}

TEST_CASE("link gain fit") {
  AcousticEnvironment env;
  env.spreading_factor = 1.5;
  const Band band{32.0, 4.0};

  SUBCASE("single deterministic path") {
    MultipathGeometry g;
    g.path_lengths = {2500.0};
    g.reflection_coeffs = {1.0};
    std::mt19937_64 rng(3);
    const auto model = fit_link_gain(g, band, env, 10000, rng);
    CHECK(model.sigma_ln_gain == 0.0);
    double expected = 0.0;
    for (int k = 0; k < 33; ++k) {
      const double f = band.low_khz() + (k + 0.5) * band.bandwidth_khz / 33;
      expected += 1.0 / attenuation_linear(2500.0, f, env);
    }
    expected /= 33.0;
    CHECK(model.mu_ln_gain == doctest::Approx(std::log(expected)).epsilon(1e-12));
    CHECK(mean_link_gain(g, band, env) == doctest::Approx(expected).epsilon(1e-12));
  }

  const auto geom = shallow_water_geometry(2500.0, 100.0, 50.0, -1.0, 0.5, 5.0, 8, 5e-4);

  SUBCASE("log gain is close to normal") {
    std::mt19937_64 rng(11);
    const auto lg = sample_ln_gain(geom, band, env, 20000, rng);
    const double n = static_cast<double>(lg.size());
    const double m = std::accumulate(lg.begin(), lg.end(), 0.0) / n;
    double m2 = 0.0, m3 = 0.0;
    for (double v : lg) {
      m2 += (v - m) * (v - m);
      m3 += (v - m) * (v - m) * (v - m);
    }
    m2 /= n;
    m3 /= n;
    const double skew = m3 / std::pow(m2, 1.5);
    MESSAGE("ln G mean " << m << " std " << std::sqrt(m2) << " skewness " << skew);
    CHECK(m2 > 0.0);
    CHECK(std::abs(skew) < 0.5);
  }

  SUBCASE("fixed seed is bit reproducible") {
    std::mt19937_64 a(99), b(99);
    const auto ma = fit_link_gain(geom, band, env, 10000, a);
    const auto mb = fit_link_gain(geom, band, env, 10000, b);
    CHECK(ma.mu_ln_gain == mb.mu_ln_gain);
    CHECK(ma.sigma_ln_gain == mb.sigma_ln_gain);
  }

  SUBCASE("doubling A0 shifts mu by -ln 2") {
    AcousticEnvironment e2 = env;
    e2.normalizing_constant = 2.0;
    std::mt19937_64 a(5), b(5);
    const auto ma = fit_link_gain(geom, band, env, 10000, a);
    const auto mb = fit_link_gain(geom, band, e2, 10000, b);
    CHECK(mb.mu_ln_gain - ma.mu_ln_gain == doctest::Approx(-std::log(2.0)).epsilon(1e-9));
    CHECK(mb.sigma_ln_gain == doctest::Approx(ma.sigma_ln_gain).epsilon(1e-9));
  }

  SUBCASE("errors") {
    MultipathGeometry empty;
    std::mt19937_64 rng(1);
    CHECK_THROWS(fit_link_gain(empty, band, env, 10000, rng));
    CHECK_THROWS_AS(fit_link_gain(geom, band, env, 100, rng), std::domain_error);
  }
}

TEST_CASE("ber_lognormal") {
  SUBCASE("degenerate distribution") {
    for (double g0 : {0.1, 1.0, 4.0, 20.0})
      CHECK(ber_lognormal(std::log(g0), 0.0) == doctest::Approx(q_function(std::sqrt(2.0 * g0))).epsilon(1e-14));
  }
  SUBCASE("limits") {
    CHECK(ber_lognormal(60.0, 1.0) < 1e-300);
    CHECK(ber_lognormal(-60.0, 1.0) == doctest::Approx(0.5).epsilon(1e-9));
  }
  SUBCASE("bounded and decreasing in mu") {
    for (double s : {0.0, 0.3, 1.0, 2.5}) {
      double prev = 0.5;
      for (double mu = -8.0; mu < 8.0; mu += 0.25) {
        const double p = ber_lognormal(mu, s);
        CHECK(p >= 0.0);
        CHECK(p <= 0.5);
        CHECK(p <= prev);
        prev = p;
      }
    }
  }
  SUBCASE("Monte Carlo oracle") {
    const double mu = std::log(10.0), sigma = 1.0;
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z(mu, sigma);
    const int n = 10'000'000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = q_function(std::sqrt(2.0 * std::exp(z(rng))));
      s += v;
      s2 += v * v;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(ber_lognormal(mu, sigma) - mean) <= 3.0 * se);
  }
  CHECK_THROWS_AS(ber_lognormal(0.0, -1.0), std::domain_error);
  CHECK_THROWS_AS(ber_lognormal(std::nan(""), 1.0), std::domain_error);
}

TEST_CASE("packet_loss") {
  std::vector<double> zeros(100, 0.0);
  CHECK(packet_loss(zeros) == 0.0);

  const std::vector<double> uniform(12000, 1e-5);
  CHECK(packet_loss(uniform) == doctest::Approx(1.0 - std::pow(1.0 - 1e-5, 12000)).epsilon(1e-12));

  SUBCASE("segments match the direct product in extended precision") {
    std::vector<BerSegment> segs{{1, 3000, 0.0, 1e-6}, {3001, 4500, 0.0, 2e-3}, {4501, 9000, 0.0, 1e-6},
                                 {9001, 10000, 0.0, 5e-4}, {10001, 12000, 0.0, 1e-6}};
    long double prod = 1.0L;
    std::vector<double> bits;
    for (const auto& s : segs)
      for (auto k = s.first_bit; k <= s.last_bit; ++k) {
        prod *= 1.0L - s.ber;
        bits.push_back(s.ber);
      }
    const double oracle = static_cast<double>(1.0L - prod);
    CHECK(std::abs(packet_loss(segs) - oracle) / oracle < 1e-12);
    CHECK(std::abs(packet_loss(bits) - oracle) / oracle < 1e-12);
  }

  SUBCASE("monotone and permutation invariant") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1e-3);
    std::vector<double> p(500);
    for (auto& x : p) x = u(rng);
    const double base = packet_loss(p);
    auto q = p;
    std::shuffle(q.begin(), q.end(), rng);
    CHECK(packet_loss(q) == doctest::Approx(base).epsilon(1e-13));
    q = p;
    q[17] += 1e-3;
    CHECK(packet_loss(q) >= base);
  }
  const std::vector<double> bad{0.1, 1.5};
  CHECK_THROWS_AS(packet_loss(bad), std::domain_error);
}
