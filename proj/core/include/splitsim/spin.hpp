#pragma once

#include <cstdint>
#include <ctime>
#include <thread>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#endif

namespace splitsim {

inline void cpu_relax() {
#if defined(__x86_64__) || defined(__i386__)
  _mm_pause();
#else
  std::this_thread::yield();
#endif
}

// Poll backoff for channel waits: brief busy spin, then yield, then short
// sleeps. Oversubscribed deployments (more simulators than cores) depend on
// the yield/sleep stages to keep making progress.
class SpinBackoff {
 public:
  void pause() {
    if (rounds_ < 64) {
      cpu_relax();
    } else if (rounds_ < 1u << 14) {
      std::this_thread::yield();
    } else {
      timespec ts{0, 50000};  // 50us
      nanosleep(&ts, nullptr);
    }
    rounds_++;
  }

  void reset() { rounds_ = 0; }
  uint64_t rounds() const { return rounds_; }

 private:
  uint64_t rounds_ = 0;
};

}  // namespace splitsim
