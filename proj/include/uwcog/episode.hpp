#pragma once

// Per-episode bookkeeping shared by all schedulers.

#include <cstdint>
#include <random>
#include <vector>

namespace uwcog {

/// One slot of an episode trace.
struct SlotRecord {
  long slot = 0;
  std::uint32_t pu = 0;          // PU hops transmitting
  std::uint32_t decision = 0;    // SU decisions before buffer masking
  std::uint32_t effective = 0;   // SU hops actually transmitting
  double pu_bits = 0.0;
  double su_bits = 0.0;
};

struct EpisodeResult {
  double pu_bits = 0.0;
  double su_bits = 0.0;
  long slots = 0;
  long su_attempts = 0;  // SU transmissions actually made
  std::vector<SlotRecord> trace;  // filled only on request

  double total_bits() const { return pu_bits + su_bits; }
};

struct EpisodeOptions {
  int horizon = 300;
  std::uint64_t seed = 1;
  std::uint64_t run = 0;
  bool record_trace = false;
};

/// Random streams of one run. The environment stream drives arrivals and link
/// outcomes only, so schemes run under the same seed see the same traffic.
struct EpisodeStreams {
  std::mt19937_64 environment;
  std::mt19937_64 policy;
  std::mt19937_64 sensing;

  EpisodeStreams(std::uint64_t seed, std::uint64_t run);
};

/// Uniform draw on [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace uwcog
