#include "uwcog/channel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>

#include "uwcog/errors.hpp"

namespace uwcog::channel {

void AcousticEnvironment::validate() const {
  std::vector<std::string> issues;
  if (!(spreading_factor >= 1.0 && spreading_factor <= 2.0)) issues.emplace_back("environment.spreading_factor must lie in [1, 2]");
  if (!(normalizing_constant > 0.0)) issues.emplace_back("environment.normalizing_constant must be positive");
  if (!(shipping_activity >= 0.0 && shipping_activity <= 1.0)) issues.emplace_back("environment.shipping_activity must lie in [0, 1]");
  if (!(wind_speed >= 0.0)) issues.emplace_back("environment.wind_speed must be non-negative");
  if (!(sound_speed > 0.0)) issues.emplace_back("environment.sound_speed must be positive");
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

void Band::validate() const {
  if (!(bandwidth_khz > 0.0)) throw ConfigError("band.bandwidth_khz must be positive");
  if (!(low_khz() > 0.0)) throw ConfigError("band.center_khz - bandwidth/2 must be positive");
}

double attenuation_db(double distance_m, double f_khz, const AcousticEnvironment& env) {
  if (!(distance_m > 0.0)) throw std::domain_error("attenuation_db: distance must be positive");
  if (!(f_khz > 0.0)) throw std::domain_error("attenuation_db: frequency must be positive");
  return env.spreading_factor * 10.0 * std::log10(distance_m) +
         distance_m / 1e3 * absorption_db_per_km(f_khz) + 10.0 * std::log10(env.normalizing_constant);
}

NoisePsd noise_psd(double f_khz, const AcousticEnvironment& env) {
  if (!(f_khz > 0.0)) throw std::domain_error("noise_psd: frequency must be positive");
  const double lf = std::log10(f_khz);
  NoisePsd out{};
  out.turbulence_db = 17.0 - 30.0 * lf;
  out.shipping_db = 40.0 + 20.0 * (env.shipping_activity - 0.5) + 26.0 * lf - 60.0 * std::log10(f_khz + 0.03);
  out.wind_db = 50.0 + 7.5 * std::sqrt(env.wind_speed) + 20.0 * lf - 40.0 * std::log10(f_khz + 0.4);
  out.thermal_db = -15.0 + 20.0 * lf;
  auto lin = [](double db) { return std::pow(10.0, db / 10.0); };
  out.total_linear = lin(out.turbulence_db) + lin(out.shipping_db) + lin(out.wind_db) + lin(out.thermal_db);
  out.total_db = 10.0 * std::log10(out.total_linear);
  return out;
}

double in_band_noise_power(const Band& band, const AcousticEnvironment& env, int intervals) {
  band.validate();
  if (intervals < 1) throw std::domain_error("in_band_noise_power: need at least one interval");
  const double lo = band.low_khz();
  const double step = band.bandwidth_khz / intervals;
  double acc = 0.5 * (noise_psd(lo, env).total_linear + noise_psd(band.high_khz(), env).total_linear);
  for (int k = 1; k < intervals; ++k) acc += noise_psd(lo + k * step, env).total_linear;
  return acc * step * 1e3;  // df in Hz
}

void MultipathGeometry::validate() const {
  std::vector<std::string> issues;
  if (path_lengths.empty()) issues.emplace_back("multipath: at least one path is required");
  if (path_lengths.size() != reflection_coeffs.size()) issues.emplace_back("multipath: one reflection coefficient per path");
  if (!path_lengths.empty()) {
    if (!(path_lengths.front() > 0.0)) issues.emplace_back("multipath: path lengths must be positive");
    if (!std::is_sorted(path_lengths.begin(), path_lengths.end()))
      issues.emplace_back("multipath: path lengths must be ascending");
  }
  if (!reflection_coeffs.empty() && reflection_coeffs.front() != 1.0)
    issues.emplace_back("multipath: the direct path reflection coefficient must be 1");
  if (micropath_count < 1) issues.emplace_back("multipath: micropath_count must be >= 1");
  if (length_deviation_std < 0.0 || micropath_delay_spread < 0.0)
    issues.emplace_back("multipath: deviations must be non-negative");
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

MultipathGeometry shallow_water_geometry(double range_m, double water_depth_m, double node_depth_m,
                                         double surface_reflection, double bottom_reflection,
                                         double length_deviation_std, int micropath_count,
                                         double micropath_delay_spread) {
  if (!(range_m > 0.0)) throw std::domain_error("shallow_water_geometry: range must be positive");
  if (!(node_depth_m > 0.0 && node_depth_m < water_depth_m))
    throw ConfigError("multipath: node depth must lie strictly inside the water column");
  const double surface = std::hypot(range_m, 2.0 * node_depth_m);
  const double bottom = std::hypot(range_m, 2.0 * (water_depth_m - node_depth_m));
  std::vector<std::pair<double, double>> rays{{range_m, 1.0}, {surface, surface_reflection}, {bottom, bottom_reflection}};
  std::stable_sort(rays.begin() + 1, rays.end(), [](auto& a, auto& b) { return a.first < b.first; });
  MultipathGeometry g;
  for (auto [len, refl] : rays) {
    g.path_lengths.push_back(len);
    g.reflection_coeffs.push_back(refl);
  }
  g.length_deviation_std = length_deviation_std;
  g.micropath_count = micropath_count;
  g.micropath_delay_spread = micropath_delay_spread;
  return g;
}

void LinkGainModel::validate() const {
  if (!(sigma_ln_gain >= 0.0)) throw ConfigError("link gain: sigma_ln_gain must be non-negative");
  if (!std::isfinite(mu_ln_gain)) throw ConfigError("link gain: mu_ln_gain must be finite");
  band.validate();
}

namespace {

double reference_absorption(const MultipathGeometry& g, const Band& band) {
  if (g.reference_absorption) return *g.reference_absorption;
  return std::pow(10.0, absorption_db_per_km(band.center_khz) / 1e4);
}

std::vector<double> frequency_grid(const Band& band, int points) {
  std::vector<double> f(static_cast<std::size_t>(points));
  const double step = band.bandwidth_khz / points;
  for (int k = 0; k < points; ++k) f[static_cast<std::size_t>(k)] = band.low_khz() + (k + 0.5) * step;
  return f;
}

}  // namespace

std::vector<double> sample_ln_gain(const MultipathGeometry& geometry, const Band& band,
                                   const AcousticEnvironment& env, std::size_t sample_count,
                                   std::mt19937_64& rng, int frequency_points) {
  if (geometry.path_lengths.empty()) throw ConfigError("fit_link_gain: degenerate geometry without paths");
  geometry.validate();
  band.validate();
  env.validate();

  const std::size_t paths = geometry.path_lengths.size();
  const auto freqs = frequency_grid(band, frequency_points);
  const std::size_t nf = freqs.size();
  const double a0 = reference_absorption(geometry, band);
  const int micro = geometry.micropath_count;
  const double micro_norm = 1.0 / std::sqrt(static_cast<double>(micro));

  // Nominal per-path amplitude at each grid frequency.
  Eigen::MatrixXd nominal(static_cast<Eigen::Index>(paths), static_cast<Eigen::Index>(nf));
  std::vector<double> xi(paths);
  for (std::size_t l = 0; l < paths; ++l) {
    xi[l] = a0 - 1.0 + env.spreading_factor / geometry.path_lengths[l];
    for (std::size_t k = 0; k < nf; ++k)
      nominal(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) =
          geometry.reflection_coeffs[l] / std::sqrt(attenuation_linear(geometry.path_lengths[l], freqs[k], env));
  }

  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> ln_gain(sample_count);
  std::vector<std::complex<double>> response(nf);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  for (std::size_t n = 0; n < sample_count; ++n) {
    std::fill(response.begin(), response.end(), std::complex<double>{});
    for (std::size_t l = 0; l < paths; ++l) {
      const double dd = geometry.length_deviation_std * unit(rng);
      const double large_scale = std::exp(-xi[l] * dd / 2.0);
      const double delay = (geometry.path_lengths[l] + dd) / env.sound_speed;
      for (int i = 0; i < micro; ++i) {
        const double tau = delay + geometry.micropath_delay_spread * unit(rng);
        for (std::size_t k = 0; k < nf; ++k) {
          const double phase = -two_pi * freqs[k] * 1e3 * tau;
          const double amp = nominal(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) * large_scale * micro_norm;
          response[k] += std::polar(amp, phase);
        }
      }
    }
    double g = 0.0;
    for (const auto& h : response) g += std::norm(h);
    ln_gain[n] = std::log(g / static_cast<double>(nf));
  }
  return ln_gain;
}

LinkGainModel fit_link_gain(const MultipathGeometry& geometry, const Band& band,
                            const AcousticEnvironment& env, std::size_t sample_count,
                            std::mt19937_64& rng, int frequency_points) {
  if (sample_count < 10000) throw std::domain_error("fit_link_gain: sample_count must be at least 1e4");
  const auto ln_gain = sample_ln_gain(geometry, band, env, sample_count, rng, frequency_points);
  // Shifted two-pass moments: a deterministic channel yields exactly zero spread.
  const double shift = ln_gain.front();
  double sum = 0.0, sum_sq = 0.0;
  for (double v : ln_gain) {
    sum += v - shift;
    sum_sq += (v - shift) * (v - shift);
  }
  const double n = static_cast<double>(sample_count);
  const double mean_shifted = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean_shifted * mean_shifted) / (n - 1.0));
  LinkGainModel model;
  model.mu_ln_gain = shift + mean_shifted;
  model.sigma_ln_gain = std::sqrt(var);
  model.band = band;
  return model;
}

double mean_link_gain(const MultipathGeometry& geometry, const Band& band, const AcousticEnvironment& env) {
  geometry.validate();
  const auto freqs = frequency_grid(band, 33);
  const double a0 = reference_absorption(geometry, band);
  const double s2 = geometry.length_deviation_std * geometry.length_deviation_std;
  double acc = 0.0;
  for (double f : freqs) {
    const double w = 2.0 * std::numbers::pi * f * 1e3 * geometry.micropath_delay_spread;
    const double micro_gain = 1.0 + (geometry.micropath_count - 1) * std::exp(-w * w);
    for (std::size_t l = 0; l < geometry.path_lengths.size(); ++l) {
      const double xi = a0 - 1.0 + env.spreading_factor / geometry.path_lengths[l];
      const double r = geometry.reflection_coeffs[l];
      acc += r * r / attenuation_linear(geometry.path_lengths[l], f, env) * std::exp(0.5 * xi * xi * s2) * micro_gain;
    }
  }
  return acc / static_cast<double>(freqs.size());
}

const GaussHermite& gauss_hermite(int order) {
  static std::mutex mutex;
  static std::map<int, GaussHermite> cache;
  if (order < 1 || order > 512) throw std::domain_error("gauss_hermite: order must lie in [1, 512]");
  std::lock_guard lock(mutex);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;

  // Golub-Welsch: eigen-decomposition of the symmetric Jacobi matrix.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double b = std::sqrt(k / 2.0);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  GaussHermite rule;
  rule.nodes.resize(static_cast<std::size_t>(order));
  rule.weights.resize(static_cast<std::size_t>(order));
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  for (int k = 0; k < order; ++k) {
    rule.nodes[static_cast<std::size_t>(k)] = solver.eigenvalues()(k);
    const double v0 = solver.eigenvectors()(0, k);
    rule.weights[static_cast<std::size_t>(k)] = sqrt_pi * v0 * v0;
  }
  return cache.emplace(order, std::move(rule)).first->second;
}

namespace {
double qpsk_ber(double ln_gamma) {
  // Q(sqrt(2 gamma)) = erfc(sqrt(gamma)) / 2
  return 0.5 * std::erfc(std::sqrt(std::exp(ln_gamma)));
}
}  // namespace

double ber_lognormal(double mu_ln_gamma, double sigma_ln_gamma, const QuadratureConfig& cfg) {
  if (!std::isfinite(mu_ln_gamma)) throw std::domain_error("ber_lognormal: mu must be finite");
  if (!(sigma_ln_gamma >= 0.0)) throw std::domain_error("ber_lognormal: sigma must be non-negative");
  double p;
  if (sigma_ln_gamma == 0.0) {
    p = qpsk_ber(mu_ln_gamma);
  } else {
    const auto& rule = gauss_hermite(cfg.order);
    const double scale = std::sqrt(2.0) * sigma_ln_gamma;
    p = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) p += rule.weights[k] * qpsk_ber(mu_ln_gamma + scale * rule.nodes[k]);
    p /= std::sqrt(std::numbers::pi);
  }
  return std::clamp(p, 0.0, 0.5);
}

namespace {
void check_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("packet_loss: bit error rate outside [0, 1]");
}
}  // namespace

double packet_loss(std::span<const double> bit_bers) {
  double log_success = 0.0;
  for (double p : bit_bers) {
    check_probability(p);
    log_success += std::log1p(-p);
  }
  return -std::expm1(log_success);
}

double packet_loss(std::span<const BerSegment> segments) {
  double log_success = 0.0;
  for (const auto& s : segments) {
    check_probability(s.ber);
    if (s.bit_count() < 0) throw std::domain_error("packet_loss: segment with negative length");
    log_success += static_cast<double>(s.bit_count()) * std::log1p(-s.ber);
  }
  return -std::expm1(log_success);
}

}  // namespace uwcog::channel
