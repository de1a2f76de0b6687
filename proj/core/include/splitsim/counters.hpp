#pragma once

#include <chrono>
#include <cstdint>

namespace splitsim {

// Wall-clock "cycles": readings of the monotonic high-resolution clock,
// reported against a nominal cycles-per-second constant. Ratios are all the
// profiler needs, so a ns-resolution proxy stands in for the TSC.
inline constexpr uint64_t kCyclesPerSecond = 1000000000ull;

inline uint64_t wall_cycles() {
  return static_cast<uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

// Per-adapter instrumentation. The three cycle categories are disjoint by
// construction: waiting for a synchronization message, sending data
// messages, and processing incoming data messages. Message counts ride along
// for tests and the run summary.
struct AdapterCounters {
  uint64_t cycles_wait_sync = 0;
  uint64_t cycles_tx = 0;
  uint64_t cycles_rx = 0;
  uint64_t syncs_tx = 0;
  uint64_t syncs_rx = 0;
  uint64_t data_tx = 0;
  uint64_t data_rx = 0;
};

}  // namespace splitsim
