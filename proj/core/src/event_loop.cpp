#include "splitsim/event_loop.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "splitsim/errors.hpp"
#include "splitsim/spin.hpp"

namespace splitsim {

namespace {

inline uint64_t mix64(uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdull;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ull;
  x ^= x >> 33;
  return x;
}

uint64_t payload_hash(const std::vector<uint8_t>& bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (uint8_t b : bytes) h = (h ^ b) * 0x100000001b3ull;
  return h;
}

std::string horizon_diagnostic(const Simulator& sim,
                               const std::vector<InEndpoint*>& ins,
                               SimTime gate) {
  std::ostringstream os;
  os << "simulator '" << sim.id() << "' stalled at clock "
     << format_simtime(sim.now()) << " waiting for horizon "
     << format_simtime(gate) << "; per-endpoint horizons:";
  for (const auto* ep : ins)
    os << " " << ep->config().channel_id << "="
       << format_simtime(ep->input_horizon())
       << (ep->peer_closed() ? "(closed)" : "");
  return os.str();
}

void busy_spin_ns(uint64_t ns) {
  uint64_t start = wall_cycles();
  while (wall_cycles() - start < ns) cpu_relax();
}

}  // namespace

void Simulator::schedule(SimTime t, uint32_t klass, uint64_t a, uint64_t b,
                         std::function<void()> fn) {
  if (t < clock_)
    throw ProtocolError("simulator '" + id_ + "': event scheduled at " +
                        format_simtime(t) + " before clock " +
                        format_simtime(clock_));
  queue_.push(Event{t, klass, a, b, insertion_counter_++, std::move(fn)});
}

void Simulator::on_channel_message(InEndpoint& ep, ChannelMessage msg) {
  (void)ep;
  (void)msg;
}

class LoopRunner {
 public:
  LoopRunner(Simulator& sim, const LoopOptions& opt) : sim_(sim), opt_(opt) {
    if (opt.sample_sink && opt.sample_interval_s <= 0)
      throw ConfigError("profiling sample interval must be > 0");
    ins_ = sim.ins_;
    outs_ = sim.outs_;
    // Stable endpoint order: channel id, the configuration-derived key.
    auto by_id = [](const auto* x, const auto* y) {
      return x->config().channel_id < y->config().channel_id;
    };
    std::sort(ins_.begin(), ins_.end(), by_id);
    std::sort(outs_.begin(), outs_.end(), by_id);
    for (auto* ep : ins_) ep->set_profiling(opt.profiling);
    for (auto* ep : outs_) ep->set_profiling(opt.profiling);
  }

  LoopExit run() {
    last_progress_wall_ = wall_cycles();
    maybe_sample(true);
    for (;;) {
      if (opt_.stop_flag &&
          opt_.stop_flag->load(std::memory_order_relaxed)) {
        finish_timestep();
        maybe_sample(true);
        return LoopExit::Stopped;
      }
      poll_all();

      SimTime u = opt_.end_time;
      if (!sim_.queue_.empty() && sim_.queue_.top().t < u)
        u = sim_.queue_.top().t;
      const InEndpoint* chan_best = nullptr;
      for (auto* ep : ins_)
        if (ep->has_data() && ep->front_delivery() <= u) {
          if (ep->front_delivery() < u || chan_best == nullptr) {
            u = ep->front_delivery();
            chan_best = ep;
          }
        }
      bool at_end = u >= opt_.end_time;
      if (at_end) u = opt_.end_time;
      SimTime gate = at_end ? u : u + SimTime(1);
      SimTime h = min_horizon();

      if (h >= gate) {
        if (dirty_ && u > sim_.clock_) {
          finish_timestep();
          continue;  // the hook may have scheduled earlier work
        }
        if (sim_.clock_ < u) advance_clock(u);
        if (at_end) {
          finish_timestep();
          for (auto* out : outs_) out->flush_sync(opt_.end_time);
          maybe_sample(true);
          return LoopExit::Completed;
        }
        process_one(u);
        progress();
      } else {
        SimTime creep = std::min(u, h);
        if (dirty_ && creep > sim_.clock_) {
          finish_timestep();
          continue;
        }
        if (creep > sim_.clock_) {
          advance_clock(creep);
          progress();
        } else {
          blocked_iteration(gate, h);
        }
      }
      maybe_sample(false);
    }
  }

 private:
  void poll_all() {
    for (auto* ep : ins_) ep->poll();
  }

  SimTime min_horizon() const {
    SimTime h = SimTime::max();
    for (auto* ep : ins_) h = std::min(h, ep->input_horizon());
    return h;
  }

  void advance_clock(SimTime t) {
    sim_.clock_ = t;
    for (auto* out : outs_) out->maybe_send_sync(t);
  }

  void finish_timestep() {
    if (!dirty_) return;
    dirty_ = false;
    sim_.on_timestep_complete(sim_.clock_);
  }

  void process_one(SimTime u) {
    // Local events before channel deliveries of equal time; deliveries
    // ordered by (channel id, seq).
    InEndpoint* chan = nullptr;
    for (auto* ep : ins_)
      if (ep->has_data() && ep->front_delivery() == u) {
        chan = ep;
        break;
      }
    bool take_local = false;
    if (!sim_.queue_.empty() && sim_.queue_.top().t == u) take_local = true;

    if (take_local) {
      // const_cast: priority_queue exposes only const top(); moving the
      // closure out before pop is safe since we pop immediately.
      auto& top = const_cast<Simulator::Event&>(sim_.queue_.top());
      auto fn = std::move(top.fn);
      uint64_t th = mix64(u.ps ^ mix64(top.klass) ^ mix64(top.a) ^
                          mix64(top.b + 0x517cc1b727220a95ull));
      sim_.queue_.pop();
      fn();
      note_trace(th);
    } else if (chan) {
      ChannelMessage msg = chan->pop();
      uint64_t t0 = 0;
      if (opt_.profiling && chan->counters()) t0 = wall_cycles();
      uint64_t th =
          mix64(u.ps ^ mix64(0x632be59bd9b4e019ull) ^
                payload_hash(msg.payload) ^ mix64(msg.seq));
      sim_.on_channel_message(*chan, std::move(msg));
      if (opt_.profiling && chan->counters())
        chan->counters()->cycles_rx += wall_cycles() - t0;
      note_trace(th);
    } else {
      return;  // nothing at u after all (spurious wakeup)
    }
    if (opt_.busy_ns_per_event) busy_spin_ns(opt_.busy_ns_per_event);
    dirty_ = true;
    sim_.events_processed_++;
    for (auto* out : outs_) out->maybe_send_sync(sim_.clock_);
  }

  void note_trace(uint64_t item_hash) {
    sim_.trace_hash_ = mix64(sim_.trace_hash_ ^ item_hash);
  }

  void blocked_iteration(SimTime gate, SimTime h) {
    // Identify the laggard (smallest horizon) and charge the blocked time
    // to exactly that adapter.
    InEndpoint* laggard = nullptr;
    for (auto* ep : ins_)
      if (ep->input_horizon() < gate &&
          (laggard == nullptr ||
           ep->input_horizon() < laggard->input_horizon()))
        laggard = ep;
    if (laggard && laggard->exhausted())
      throw ChannelClosedError("channel '" +
                               laggard->config().channel_id +
                               "' closed by peer while simulator '" +
                               sim_.id() + "' waited for horizon " +
                               format_simtime(gate));

    if (h > last_seen_horizon_) {
      last_seen_horizon_ = h;
      progress();
    }

    if (opt_.profiling) {
      uint64_t now = wall_cycles();
      if (wait_checkpoint_ == 0) wait_checkpoint_ = now;
      if (laggard && laggard->counters())
        laggard->counters()->cycles_wait_sync += now - wait_checkpoint_;
      wait_checkpoint_ = now;
      check_watchdog(now, gate);
    } else if ((blocked_rounds_++ & 0xfff) == 0) {
      check_watchdog(wall_cycles(), gate);
    }
    backoff_.pause();
  }

  void check_watchdog(uint64_t now, SimTime gate) {
    if (opt_.watchdog_ms == 0) return;
    if (now - last_progress_wall_ > opt_.watchdog_ms * 1000000ull)
      throw DeadlockError(horizon_diagnostic(sim_, ins_, gate));
  }

  void progress() {
    last_progress_wall_ = wall_cycles();
    wait_checkpoint_ = 0;
    backoff_.reset();
  }

  void maybe_sample(bool force) {
    if (!opt_.sample_sink || sampler_dead_) return;
    uint64_t now = wall_cycles();
    if (!force && now < next_sample_wall_) return;
    uint64_t interval =
        static_cast<uint64_t>(opt_.sample_interval_s * 1e9);
    next_sample_wall_ = now + interval;
    auto& os = *opt_.sample_sink;
    os << "PROF " << sim_.id() << " " << now << " " << sim_.clock_.ps;
    for (const auto& [aid, c] : sim_.adapters_)
      os << " " << aid << ":" << c->cycles_wait_sync << ":" << c->cycles_tx
         << ":" << c->cycles_rx;
    os << "\n";
    os.flush();
    if (!os.good()) {
      // Losing samples must not take the simulation down with it.
      std::fprintf(stderr,
                   "splitsim: warning: profile sink write failed for '%s', "
                   "sampling disabled\n",
                   sim_.id().c_str());
      sampler_dead_ = true;
    }
  }

  Simulator& sim_;
  const LoopOptions& opt_;
  std::vector<InEndpoint*> ins_;
  std::vector<OutEndpoint*> outs_;
  bool dirty_ = false;
  SimTime last_seen_horizon_;
  uint64_t last_progress_wall_ = 0;
  uint64_t wait_checkpoint_ = 0;
  uint64_t blocked_rounds_ = 0;
  uint64_t next_sample_wall_ = 0;
  bool sampler_dead_ = false;
  SpinBackoff backoff_;
};

LoopExit run_event_loop(Simulator& sim, const LoopOptions& opt) {
  LoopRunner runner(sim, opt);
  return runner.run();
}

void wait_until(const std::vector<InEndpoint*>& eps, SimTime t,
                uint64_t watchdog_ms, bool profiling) {
  SpinBackoff backoff;
  uint64_t last_progress = wall_cycles();
  uint64_t checkpoint = last_progress;
  SimTime best_seen;
  for (;;) {
    InEndpoint* laggard = nullptr;
    SimTime min_h = SimTime::max();
    for (auto* ep : eps) {
      ep->poll();
      SimTime h = ep->input_horizon();
      min_h = std::min(min_h, h);
      if (h < t && (laggard == nullptr ||
                    h < laggard->input_horizon()))
        laggard = ep;
    }
    if (!laggard) return;
    if (laggard->exhausted())
      throw ChannelClosedError("channel '" + laggard->config().channel_id +
                               "' closed while waiting for horizon " +
                               format_simtime(t));
    uint64_t now = wall_cycles();
    if (min_h > best_seen) {
      best_seen = min_h;
      last_progress = now;
    }
    if (profiling && laggard->counters()) {
      laggard->counters()->cycles_wait_sync += now - checkpoint;
      checkpoint = now;
    }
    if (watchdog_ms && now - last_progress > watchdog_ms * 1000000ull)
      throw DeadlockError("wait_until: no horizon progress past " +
                          format_simtime(t) + " on channel '" +
                          laggard->config().channel_id + "'");
    backoff.pause();
  }
}

}  // namespace splitsim
