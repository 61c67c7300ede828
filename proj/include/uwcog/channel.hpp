#pragma once

// Underwater acoustic link budget: Thorp absorption, spreading loss, ambient
// noise, log-normal channel gain and per-bit error rates.
//
// Units: frequency in kHz, distance in m, power spectral densities in
// dB re uPa^2/Hz, powers linear in uPa^2. Internal arithmetic is linear.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace uwcog::channel {

struct AcousticEnvironment {
  double spreading_factor = 1.5;      // kappa, in [1, 2]
  double normalizing_constant = 1.0;  // A0, linear
  double shipping_activity = 0.5;     // s, in [0, 1]
  double wind_speed = 0.0;            // m/s
  double sound_speed = 1500.0;        // m/s

  void validate() const;
};

struct Band {
  double center_khz = 32.0;
  double bandwidth_khz = 4.0;

  double low_khz() const { return center_khz - 0.5 * bandwidth_khz; }
  double high_khz() const { return center_khz + 0.5 * bandwidth_khz; }
  void validate() const;
};

/// Thorp absorption coefficient in dB/km.
template <typename Scalar>
Scalar absorption_db_per_km(Scalar f_khz) {
  if (!(f_khz > Scalar(0))) throw std::domain_error("absorption_db_per_km: frequency must be positive");
  const Scalar f2 = f_khz * f_khz;
  return Scalar(0.11) * f2 / (Scalar(1) + f2) + Scalar(44) * f2 / (Scalar(4100) + f2) +
         Scalar(2.75e-4) * f2 + Scalar(0.003);
}

/// 10 log10 A(d, f): spreading plus absorption, including the 10 log10(A0) offset.
double attenuation_db(double distance_m, double f_khz, const AcousticEnvironment& env);

inline double attenuation_linear(double distance_m, double f_khz, const AcousticEnvironment& env) {
  return std::pow(10.0, attenuation_db(distance_m, f_khz, env) / 10.0);
}

struct NoisePsd {
  double turbulence_db;
  double shipping_db;
  double wind_db;
  double thermal_db;
  double total_linear;  // uPa^2/Hz
  double total_db;
};

NoisePsd noise_psd(double f_khz, const AcousticEnvironment& env);

/// Integral of the linear noise PSD over [low, high] kHz with df in Hz (uPa^2),
/// composite trapezoid with `intervals` panels.
double in_band_noise_power(const Band& band, const AcousticEnvironment& env, int intervals = 400);

struct MultipathGeometry {
  std::vector<double> path_lengths;      // nominal, ascending, m
  std::vector<double> reflection_coeffs; // cumulative, first entry 1
  double length_deviation_std = 0.0;     // m
  int micropath_count = 1;
  double micropath_delay_spread = 0.0;   // s, std of micro-path delay offsets
  std::optional<double> reference_absorption;  // linear per metre; derived from band centre if empty

  void validate() const;
};

/// Direct, surface- and bottom-reflected rays between two nodes at the same depth.
MultipathGeometry shallow_water_geometry(double range_m, double water_depth_m, double node_depth_m,
                                         double surface_reflection, double bottom_reflection,
                                         double length_deviation_std, int micropath_count,
                                         double micropath_delay_spread);

struct LinkGainModel {
  double mu_ln_gain = 0.0;
  double sigma_ln_gain = 0.0;
  Band band;

  double mean_gain() const { return std::exp(mu_ln_gain + 0.5 * sigma_ln_gain * sigma_ln_gain); }
  void validate() const;
};

/// Draws of ln G for the random multipath channel (large-scale length deviations
/// plus micro-path delay scattering).
std::vector<double> sample_ln_gain(const MultipathGeometry& geometry, const Band& band,
                                   const AcousticEnvironment& env, std::size_t sample_count,
                                   std::mt19937_64& rng, int frequency_points = 33);

/// Monte Carlo fit of the band-averaged gain G = (1/B) int |H(f)|^2 df to a log-normal law.
LinkGainModel fit_link_gain(const MultipathGeometry& geometry, const Band& band,
                            const AcousticEnvironment& env, std::size_t sample_count,
                            std::mt19937_64& rng, int frequency_points = 33);

/// Expected band-averaged gain with incoherent path combining; used for interferers.
double mean_link_gain(const MultipathGeometry& geometry, const Band& band, const AcousticEnvironment& env);

/// Standard normal tail probability.
inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

struct QuadratureConfig {
  int order = 64;
};

/// Gauss-Hermite nodes and weights for int exp(-x^2) f(x) dx.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussHermite& gauss_hermite(int order);

/// Average QPSK bit error rate E[Q(sqrt(2 gamma))] for ln gamma ~ N(mu, sigma^2).
double ber_lognormal(double mu_ln_gamma, double sigma_ln_gamma, const QuadratureConfig& cfg = {});

/// A run of consecutive bits sharing one error rate.
struct BerSegment {
  std::int64_t first_bit = 1;  // 1-based, inclusive
  std::int64_t last_bit = 1;
  double interference = 0.0;   // uPa^2
  double ber = 0.0;

  std::int64_t bit_count() const { return last_bit - first_bit + 1; }
};

/// 1 - prod(1 - p_k), accumulated in log space.
double packet_loss(std::span<const double> bit_bers);
double packet_loss(std::span<const BerSegment> segments);

}  // namespace uwcog::channel
