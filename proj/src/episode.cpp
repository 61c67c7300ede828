#include "uwcog/episode.hpp"

namespace uwcog {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t run, std::uint32_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32), id};
  return std::mt19937_64(seq);
}

}  // namespace

EpisodeStreams::EpisodeStreams(std::uint64_t seed, std::uint64_t run)
    : environment(stream(seed, run, 0)), policy(stream(seed, run, 1)), sensing(stream(seed, run, 2)) {}

}  // namespace uwcog
