#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

#include "splitsim/channel.hpp"
#include "splitsim/counters.hpp"
#include "splitsim/simtime.hpp"

namespace splitsim {

// Event ordering: (time, source class, channel/a, seq/b, insertion counter)
// lexicographic, local events before channel deliveries of equal time. The
// keys derive from the system configuration, not the process layout, so the
// processing order is stable across partitionings.
inline constexpr uint32_t kClassLocal = 0;
inline constexpr uint32_t kClassChannel = 1;

class Simulator;

struct LoopOptions {
  SimTime end_time;
  uint64_t watchdog_ms = 60000;  // 0 disables the deadlock watchdog
  bool profiling = false;
  // Bottleneck injection: busy-spin this many wall ns after each event.
  uint64_t busy_ns_per_event = 0;
  // Periodic counter sampling; sink == nullptr disables it.
  std::ostream* sample_sink = nullptr;
  double sample_interval_s = 10.0;
  // Clean-shutdown request (e.g. SIGTERM in a child process).
  const std::atomic<bool>* stop_flag = nullptr;
};

enum class LoopExit { Completed, Stopped };

// A strictly single-threaded component simulator: an event queue, a clock,
// and the channel endpoints that connect it to its peers. Subclasses
// implement message dispatch and the end-of-timestep hook.
class Simulator {
 public:
  explicit Simulator(std::string id) : id_(std::move(id)) {}
  virtual ~Simulator() = default;

  const std::string& id() const { return id_; }
  SimTime now() const { return clock_; }

  void schedule(SimTime t, uint32_t klass, uint64_t a, uint64_t b,
                std::function<void()> fn);
  void schedule(SimTime t, std::function<void()> fn) {
    schedule(t, kClassLocal, 0, 0, std::move(fn));
  }
  void schedule_in(SimTime delta, std::function<void()> fn) {
    schedule(clock_ + delta, std::move(fn));
  }

  // Endpoint attachment; all endpoints must be attached before the loop runs.
  void attach_in(InEndpoint* ep) { ins_.push_back(ep); }
  void attach_out(OutEndpoint* ep) { outs_.push_back(ep); }

  // Adapter counters for the profiling sampler, keyed by adapter id.
  void register_adapter(const std::string& adapter_id, AdapterCounters* c) {
    adapters_.emplace_back(adapter_id, c);
  }
  const std::vector<std::pair<std::string, AdapterCounters*>>& adapters()
      const {
    return adapters_;
  }

  // Ordered hash over (timestamp, class, a, b, payload hash) of every
  // processed item; bit-identical across runs for a fixed config and seed.
  uint64_t event_trace_hash() const { return trace_hash_; }

  uint64_t events_processed() const { return events_processed_; }

 protected:
  // Dispatch of a data message delivered on `ep` at the current clock.
  virtual void on_channel_message(InEndpoint& ep, ChannelMessage msg);
  // Runs once per simulated timestamp that processed at least one item,
  // before the clock moves on. May schedule further events, including at the
  // completing timestamp's own time or later; must not send on channels.
  virtual void on_timestep_complete(SimTime t) { (void)t; }

 private:
  friend class LoopRunner;

  struct Event {
    SimTime t;
    uint32_t klass;
    uint64_t a, b, counter;
    std::function<void()> fn;
  };
  struct EventAfter {
    bool operator()(const Event& x, const Event& y) const {
      auto kx = std::tie(x.t, x.klass, x.a, x.b, x.counter);
      auto ky = std::tie(y.t, y.klass, y.a, y.b, y.counter);
      return kx > ky;  // min-heap
    }
  };

  std::string id_;
  SimTime clock_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
  uint64_t insertion_counter_ = 0;
  std::vector<InEndpoint*> ins_;
  std::vector<OutEndpoint*> outs_;
  std::vector<std::pair<std::string, AdapterCounters*>> adapters_;
  uint64_t trace_hash_ = 0x9e3779b97f4a7c15ull;
  uint64_t events_processed_ = 0;
};

// Drives `sim` until end_time (exclusive: events at end_time are not
// processed, the clock parks there), interleaving conservative horizon
// waits, clock creep, and sync emission. Throws DeadlockError if nothing
// moves for watchdog_ms with all peers alive, ChannelClosedError if a peer
// goes away while still needed.
LoopExit run_event_loop(Simulator& sim, const LoopOptions& opt);

// Blocks until input_horizon(ep) >= t for all eps. Wall cycles spent blocked
// are charged to the laggard endpoint's adapter counters. Standalone form of
// the wait the event loop performs; useful for handshakes and tests.
void wait_until(const std::vector<InEndpoint*>& eps, SimTime t,
                uint64_t watchdog_ms = 60000, bool profiling = true);

}  // namespace splitsim
