#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "splitsim/channel.hpp"
#include "splitsim/counters.hpp"
#include "splitsim/event_loop.hpp"
#include "splitsim/simtime.hpp"

namespace splitsim {

// ---------------------------------------------------------------------------
// Wire codecs (all little-endian, length-prefixed)

// Ethernet frame. `wire_length()` is the size used for serialization-delay
// math and includes 24 bytes of framing overhead on top of the payload,
// clamped to the 64-byte minimum.
struct EthFrame {
  static constexpr uint32_t kFramingOverhead = 24;
  static constexpr uint32_t kMinWire = 64;
  static constexpr uint32_t kMaxWire = 1518;

  std::array<uint8_t, 6> dst{};
  std::array<uint8_t, 6> src{};
  std::vector<uint8_t> payload;

  uint32_t wire_length() const {
    uint32_t raw = kFramingOverhead + static_cast<uint32_t>(payload.size());
    return raw < kMinWire ? kMinWire : raw;
  }
  // Throws ProtocolError if the frame exceeds 1518 wire bytes.
  void validate() const;

  // {dst 6B, src 6B, len 2B, payload}
  std::vector<uint8_t> encode() const;
  static EthFrame decode(const std::vector<uint8_t>& bytes);

  bool operator==(const EthFrame&) const = default;
};

enum class DevOp : uint8_t {
  MMIOWrite = 0,
  MMIORead = 1,
  MMIOReadResp = 2,
  DMARead = 3,
  DMAWrite = 4,
  DMAComplete = 5,
  Interrupt = 6,
};

const char* dev_op_name(DevOp op);

// Simplified PCI-like request/response message between a host and its NIC.
struct DeviceMessage {
  DevOp kind = DevOp::MMIOWrite;
  uint32_t req_id = 0;
  uint64_t address = 0;
  std::vector<uint8_t> data;

  // {kind 1B, reqid 4B, addr 8B, len 4B, data}
  std::vector<uint8_t> encode() const;
  static DeviceMessage decode(const std::vector<uint8_t>& bytes);

  bool operator==(const DeviceMessage&) const = default;
};

// Sub-channel-tagged payload multiplexed over one synchronized channel.
struct TrunkFrame {
  uint16_t sub_channel = 0;
  std::vector<uint8_t> inner;

  // {sub_channel_id 2B, inner length 4B, inner bytes}
  std::vector<uint8_t> encode() const;
  static TrunkFrame decode(const std::vector<uint8_t>& bytes);

  bool operator==(const TrunkFrame&) const = default;
};

// ---------------------------------------------------------------------------
// Adapters

// Common initialization and synchronization layer over one duplex channel.
// Protocol adapters build on it without re-implementing the handshake or
// counter plumbing.
class BaseAdapter {
 public:
  BaseAdapter(std::string adapter_id, ChannelHalf half,
              std::string local_sim_id);
  virtual ~BaseAdapter() = default;

  // Exchanges negotiated parameters in-band as the first message on each
  // channel direction and verifies both sides agree on latency,
  // sync_interval and protocol. Throws StartupError naming both sides'
  // values on mismatch, or on timeout.
  void handshake(uint64_t timeout_ms = 30000);

  // Split form for single-threaded wiring: send our hello now, collect and
  // verify the peer's later.
  void handshake_begin();
  void handshake_finish(uint64_t timeout_ms = 30000);

  // Registers endpoints and counters with the owning simulator's loop.
  void attach(Simulator& sim);

  const std::string& adapter_id() const { return id_; }
  const std::string& peer_sim_id() const { return peer_sim_id_; }
  bool handshake_done() const { return handshake_done_; }
  const ChannelConfig& config() const { return half_.out->config(); }

  OutEndpoint& out() { return *half_.out; }
  InEndpoint& in() { return *half_.in; }
  AdapterCounters& counters() { return counters_; }
  const AdapterCounters& counters() const { return counters_; }

 protected:
  virtual std::vector<uint16_t> handshake_sub_channels() const { return {}; }

  std::string id_;
  ChannelHalf half_;
  std::string local_sim_id_;
  std::string peer_sim_id_;
  AdapterCounters counters_;
  bool hello_sent_ = false;
  bool handshake_done_ = false;
};

// Ethernet protocol adapter: frames in, frames out.
class EthAdapter : public BaseAdapter {
 public:
  using BaseAdapter::BaseAdapter;

  void send(SimTime now, const EthFrame& frame);
  EthFrame decode(const ChannelMessage& msg) const;
};

// Device protocol adapter with request/response bookkeeping: every
// MMIORead/DMARead must be answered by exactly one matching response
// carrying the same request id.
class DeviceAdapter : public BaseAdapter {
 public:
  using BaseAdapter::BaseAdapter;

  void send(SimTime now, const DeviceMessage& msg);
  // Decodes and settles request/response state. Throws ProtocolError on an
  // unmatched or duplicate response.
  DeviceMessage receive(const ChannelMessage& msg);

  size_t pending_requests() const { return outstanding_.size(); }

 private:
  std::map<uint32_t, DevOp> outstanding_;  // req_id -> expected response op
};

class TrunkAdapter;

// Send/receive handle for one logical channel multiplexed over a trunk.
// Synchronization is the trunk's: the logical endpoint reports the trunk's
// input horizon and pays no sync cost of its own.
class TrunkLogicalEndpoint {
 public:
  uint16_t sub_channel() const { return sub_; }
  void send(SimTime now, const std::vector<uint8_t>& inner);
  SimTime input_horizon() const;

 private:
  friend class TrunkAdapter;
  TrunkLogicalEndpoint(TrunkAdapter* trunk, uint16_t sub)
      : trunk_(trunk), sub_(sub) {}
  TrunkAdapter* trunk_;
  uint16_t sub_;
};

// Multiplexes messages for multiple upper-layer channels over one
// synchronized channel, tagging each message with its sub-channel id.
class TrunkAdapter : public BaseAdapter {
 public:
  using BaseAdapter::BaseAdapter;

  // Registration happens during wiring, before the handshake; both sides
  // must register the same id set (verified at handshake).
  TrunkLogicalEndpoint* register_sub(uint16_t sub_channel_id);

  void send(uint16_t sub_channel_id, SimTime now,
            const std::vector<uint8_t>& inner);
  // Demultiplexes a delivered trunk message. Throws ProtocolError if the tag
  // was never registered.
  TrunkFrame demux(const ChannelMessage& msg) const;

 protected:
  std::vector<uint16_t> handshake_sub_channels() const override;

 private:
  std::map<uint16_t, std::unique_ptr<TrunkLogicalEndpoint>> subs_;
};

}  // namespace splitsim
