#pragma once

#include <cstdint>
#include <random>

namespace fb {

using Rng = std::mt19937_64;

// Independent random streams derived from one experiment seed. Each purpose
// gets its own generator so that, e.g., changing the probe-set size never
// shifts the example order.
enum class Stream : std::uint32_t {
  init = 1,
  data_order = 2,
  probe = 3,
  env_reset = 4,
  eval_states = 5,
  folds = 6,
  synth = 7,
  probe_states = 8,
  eval_pick = 9,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eed5eedu};
  return Rng(seq);
}

}  // namespace fb
