#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "splitsim/counters.hpp"
#include "splitsim/simtime.hpp"

namespace splitsim {

enum class Protocol : uint8_t { Ethernet = 0, Device = 1, Trunk = 2 };

enum class MsgKind : uint8_t { Sync = 0, Data = 1, Handshake = 2 };

const char* protocol_name(Protocol p);

struct ChannelConfig {
  std::string channel_id;
  SimTime latency;                     // message propagation delay, > 0
  SimTime sync_interval;               // 0 < sync_interval <= latency
  Protocol protocol = Protocol::Ethernet;

  // Throws ConfigError if latency == 0 or sync_interval outside (0, latency].
  void validate() const;
};

struct ChannelMessage {
  MsgKind kind = MsgKind::Sync;
  SimTime send_time;
  uint64_t seq = 0;  // per channel direction, receiver-assigned
  std::vector<uint8_t> payload;

  SimTime delivery_time(SimTime latency) const { return send_time + latency; }
};

// One direction of a channel: exactly one producer and one consumer, which
// may live in different threads or different processes. This is the only
// cross-simulator communication path in the framework.
class DirectedTransport {
 public:
  virtual ~DirectedTransport() = default;
  virtual bool try_push(MsgKind kind, SimTime send_time,
                        const uint8_t* payload, uint32_t len) = 0;
  virtual bool try_pop(ChannelMessage& out) = 0;
  virtual void close_producer() = 0;
  virtual bool producer_closed() const = 0;
  virtual uint32_t max_payload() const = 0;
};

// In-memory single-producer/single-consumer ring for simulators deployed as
// threads of one process.
std::shared_ptr<DirectedTransport> make_mem_transport(uint32_t slots,
                                                      uint32_t max_payload);

class OutEndpoint;
class InEndpoint;

struct EndpointPair {
  std::unique_ptr<OutEndpoint> out;
  std::unique_ptr<InEndpoint> in;
};

// Creates one synchronized channel direction with in-memory transport.
// peer_horizon on the in side starts at config.latency: nothing can arrive
// before one propagation delay has elapsed.
EndpointPair create_channel(const ChannelConfig& config);

// Sending side of one channel direction.
class OutEndpoint {
 public:
  OutEndpoint(ChannelConfig cfg, std::shared_ptr<DirectedTransport> tx);
  ~OutEndpoint();

  const ChannelConfig& config() const { return cfg_; }

  // Enqueues (Data, now, payload) toward the peer; deliverable at
  // now + latency. A data message also serves as a sync: it advances the
  // peer's horizon and resets the sync cadence. Throws ProtocolError if now
  // regresses below an earlier send.
  void send_data(SimTime now, const uint8_t* payload, size_t len);
  void send_data(SimTime now, const std::vector<uint8_t>& payload) {
    send_data(now, payload.data(), payload.size());
  }

  // Emits (Sync, now) if the cadence calls for one; returns whether it did.
  bool maybe_send_sync(SimTime now);

  // Unconditional sync at `now` unless one was already sent at `now`
  // (used for the final promise when a simulator shuts down).
  void flush_sync(SimTime now);

  void send_handshake(const std::vector<uint8_t>& payload);

  void close();

  void attach_counters(AdapterCounters* c) { counters_ = c; }
  void set_profiling(bool on) { profiling_ = on; }

  SimTime last_sync_sent() const { return last_sync_sent_; }

 private:
  void push_blocking(MsgKind kind, SimTime send_time, const uint8_t* payload,
                     uint32_t len);

  ChannelConfig cfg_;
  std::shared_ptr<DirectedTransport> tx_;
  AdapterCounters* counters_ = nullptr;
  SimTime last_send_time_;
  SimTime last_sync_sent_;
  bool sent_anything_ = false;
  bool profiling_ = false;
  bool closed_ = false;
};

// Receiving side of one channel direction. Owned and polled by exactly one
// simulator; poll() drains the transport into a timestamp-ordered inbox and
// advances the peer horizon.
class InEndpoint {
 public:
  InEndpoint(ChannelConfig cfg, std::shared_ptr<DirectedTransport> rx);

  const ChannelConfig& config() const { return cfg_; }

  // Drains the transport. Throws ProtocolError on a send_time regression.
  void poll();

  // Lower bound on the delivery time of any future message: the receiver may
  // safely process all local events strictly below this value. Never
  // decreases.
  SimTime input_horizon() const { return peer_horizon_; }

  bool has_data() const { return !inbox_.empty(); }
  // Delivery time (send_time + latency) of the oldest pending data message.
  SimTime front_delivery() const;
  const ChannelMessage& front() const { return inbox_.front(); }
  ChannelMessage pop();

  // First message on a direction is the peer's handshake frame.
  std::optional<std::vector<uint8_t>> take_handshake();

  // True once the peer closed the direction and everything sent was drained.
  bool exhausted() const;
  bool peer_closed() const { return tx_closed_; }

  void attach_counters(AdapterCounters* c) { counters_ = c; }
  void set_profiling(bool on) { profiling_ = on; }
  AdapterCounters* counters() const { return counters_; }

 private:
  ChannelConfig cfg_;
  std::shared_ptr<DirectedTransport> rx_;
  AdapterCounters* counters_ = nullptr;
  SimTime peer_horizon_;
  SimTime last_recv_send_time_;
  uint64_t next_seq_ = 0;
  std::deque<ChannelMessage> inbox_;
  std::optional<std::vector<uint8_t>> handshake_;
  bool tx_closed_ = false;
  bool profiling_ = false;
};

// A full-duplex channel endpoint as seen by one simulator: one direction out,
// one direction in.
struct ChannelHalf {
  std::unique_ptr<OutEndpoint> out;
  std::unique_ptr<InEndpoint> in;
};

// Duplex in-memory channel for thread deployments.
std::pair<ChannelHalf, ChannelHalf> create_duplex_channel(
    const ChannelConfig& config, uint32_t slots = 4096,
    uint32_t max_payload = 2048);

// Cross-process duplex channel over a POSIX shared-memory segment.
//
// Segment layout: fixed header {magic "SPLTSIM1", version, slot count, slot
// size, latency, sync_interval}, followed by two ring buffers (one per
// direction); each slot holds {kind 1B, send_time 8B LE, payload length 4B
// LE, payload}.
class ShmChannel {
 public:
  static constexpr uint32_t kDefaultSlots = 2048;
  static constexpr uint32_t kDefaultPayload = 2048;

  // Creates the segment (listener side). The returned half sends on
  // direction 0 and receives on direction 1.
  static ChannelHalf create(const std::string& shm_name,
                            const ChannelConfig& config,
                            uint32_t slots = kDefaultSlots,
                            uint32_t max_payload = kDefaultPayload);

  // Opens an existing segment (connector side), retrying until it appears or
  // timeout_ms elapses. Verifies the header against `config` and throws
  // StartupError naming both sides on mismatch.
  static ChannelHalf open(const std::string& shm_name,
                          const ChannelConfig& config, uint64_t timeout_ms);

  static void unlink(const std::string& shm_name);
};

}  // namespace splitsim
