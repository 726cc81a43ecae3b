#include "marginlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace marginlab {

CounterRng CounterRng::substream(std::uint64_t tag) const noexcept {
  return CounterRng(mix(key_ ^ mix(tag ^ 0x632be59bd9b4e019ULL)), Raw{});
}

double CounterRng::normal() noexcept {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace marginlab
