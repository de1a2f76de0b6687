#include "splitsim/adapters.hpp"

#include <chrono>
#include <cstring>
#include <iomanip>
#include <sstream>

#include "splitsim/errors.hpp"
#include "splitsim/spin.hpp"

namespace splitsim {

namespace {

void put_u16(std::vector<uint8_t>& v, uint16_t x) {
  v.push_back(static_cast<uint8_t>(x));
  v.push_back(static_cast<uint8_t>(x >> 8));
}
void put_u32(std::vector<uint8_t>& v, uint32_t x) {
  for (int i = 0; i < 4; i++) v.push_back(static_cast<uint8_t>(x >> (8 * i)));
}
void put_u64(std::vector<uint8_t>& v, uint64_t x) {
  for (int i = 0; i < 8; i++) v.push_back(static_cast<uint8_t>(x >> (8 * i)));
}
uint16_t get_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}
uint32_t get_u32(const uint8_t* p) {
  uint32_t x = 0;
  for (int i = 3; i >= 0; i--) x = (x << 8) | p[i];
  return x;
}
uint64_t get_u64(const uint8_t* p) {
  uint64_t x = 0;
  for (int i = 7; i >= 0; i--) x = (x << 8) | p[i];
  return x;
}

std::string hex_dump(const std::vector<uint8_t>& bytes, size_t limit = 64) {
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (size_t i = 0; i < bytes.size() && i < limit; i++)
    os << std::setw(2) << static_cast<unsigned>(bytes[i])
       << ((i + 1) % 16 == 0 ? "\n" : " ");
  if (bytes.size() > limit) os << "... (" << std::dec << bytes.size() << "B)";
  return os.str();
}

[[noreturn]] void malformed(const char* what,
                            const std::vector<uint8_t>& bytes) {
  throw ProtocolError(std::string("malformed ") + what +
                      " on channel:\n" + hex_dump(bytes));
}

}  // namespace

// ---------------------------------------------------------------------------
// EthFrame

void EthFrame::validate() const {
  if (wire_length() > kMaxWire)
    throw ProtocolError("ethernet frame of " +
                        std::to_string(wire_length()) +
                        " wire bytes exceeds " + std::to_string(kMaxWire));
}

std::vector<uint8_t> EthFrame::encode() const {
  validate();
  std::vector<uint8_t> v;
  v.reserve(14 + payload.size());
  v.insert(v.end(), dst.begin(), dst.end());
  v.insert(v.end(), src.begin(), src.end());
  put_u16(v, static_cast<uint16_t>(payload.size()));
  v.insert(v.end(), payload.begin(), payload.end());
  return v;
}

EthFrame EthFrame::decode(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 14) malformed("ethernet frame", bytes);
  EthFrame f;
  std::memcpy(f.dst.data(), bytes.data(), 6);
  std::memcpy(f.src.data(), bytes.data() + 6, 6);
  uint16_t len = get_u16(bytes.data() + 12);
  if (bytes.size() != 14u + len) malformed("ethernet frame", bytes);
  f.payload.assign(bytes.begin() + 14, bytes.end());
  f.validate();
  return f;
}

// ---------------------------------------------------------------------------
// DeviceMessage

const char* dev_op_name(DevOp op) {
  switch (op) {
    case DevOp::MMIOWrite:
      return "MMIOWrite";
    case DevOp::MMIORead:
      return "MMIORead";
    case DevOp::MMIOReadResp:
      return "MMIOReadResp";
    case DevOp::DMARead:
      return "DMARead";
    case DevOp::DMAWrite:
      return "DMAWrite";
    case DevOp::DMAComplete:
      return "DMAComplete";
    case DevOp::Interrupt:
      return "Interrupt";
  }
  return "?";
}

std::vector<uint8_t> DeviceMessage::encode() const {
  std::vector<uint8_t> v;
  v.reserve(17 + data.size());
  v.push_back(static_cast<uint8_t>(kind));
  put_u32(v, req_id);
  put_u64(v, address);
  put_u32(v, static_cast<uint32_t>(data.size()));
  v.insert(v.end(), data.begin(), data.end());
  return v;
}

DeviceMessage DeviceMessage::decode(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 17) malformed("device message", bytes);
  if (bytes[0] > static_cast<uint8_t>(DevOp::Interrupt))
    malformed("device message", bytes);
  DeviceMessage m;
  m.kind = static_cast<DevOp>(bytes[0]);
  m.req_id = get_u32(bytes.data() + 1);
  m.address = get_u64(bytes.data() + 5);
  uint32_t len = get_u32(bytes.data() + 13);
  if (bytes.size() != 17u + len) malformed("device message", bytes);
  m.data.assign(bytes.begin() + 17, bytes.end());
  return m;
}

// ---------------------------------------------------------------------------
// TrunkFrame

std::vector<uint8_t> TrunkFrame::encode() const {
  std::vector<uint8_t> v;
  v.reserve(6 + inner.size());
  put_u16(v, sub_channel);
  put_u32(v, static_cast<uint32_t>(inner.size()));
  v.insert(v.end(), inner.begin(), inner.end());
  return v;
}

TrunkFrame TrunkFrame::decode(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 6) malformed("trunk frame", bytes);
  TrunkFrame f;
  f.sub_channel = get_u16(bytes.data());
  uint32_t len = get_u32(bytes.data() + 2);
  if (bytes.size() != 6u + len) malformed("trunk frame", bytes);
  f.inner.assign(bytes.begin() + 6, bytes.end());
  return f;
}

// ---------------------------------------------------------------------------
// BaseAdapter

BaseAdapter::BaseAdapter(std::string adapter_id, ChannelHalf half,
                         std::string local_sim_id)
    : id_(std::move(adapter_id)),
      half_(std::move(half)),
      local_sim_id_(std::move(local_sim_id)) {
  half_.out->attach_counters(&counters_);
  half_.in->attach_counters(&counters_);
}

void BaseAdapter::handshake(uint64_t timeout_ms) {
  handshake_begin();
  handshake_finish(timeout_ms);
}

void BaseAdapter::handshake_begin() {
  if (hello_sent_) return;
  hello_sent_ = true;
  const ChannelConfig& cfg = half_.out->config();
  std::vector<uint8_t> hello;
  hello.push_back(static_cast<uint8_t>(cfg.protocol));
  put_u64(hello, cfg.latency.ps);
  put_u64(hello, cfg.sync_interval.ps);
  auto subs = handshake_sub_channels();
  put_u16(hello, static_cast<uint16_t>(subs.size()));
  for (uint16_t s : subs) put_u16(hello, s);
  put_u16(hello, static_cast<uint16_t>(local_sim_id_.size()));
  hello.insert(hello.end(), local_sim_id_.begin(), local_sim_id_.end());
  half_.out->send_handshake(hello);
}

void BaseAdapter::handshake_finish(uint64_t timeout_ms) {
  const ChannelConfig& cfg = half_.out->config();
  auto subs = handshake_sub_channels();
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::milliseconds(timeout_ms);
  SpinBackoff backoff;
  std::optional<std::vector<uint8_t>> peer;
  for (;;) {
    half_.in->poll();
    peer = half_.in->take_handshake();
    if (peer) break;
    if (half_.in->peer_closed())
      throw StartupError("adapter '" + id_ +
                         "': peer closed channel before handshake");
    if (std::chrono::steady_clock::now() > deadline)
      throw StartupError("adapter '" + id_ + "': handshake timeout after " +
                         std::to_string(timeout_ms) + "ms");
    backoff.pause();
  }

  const auto& p = *peer;
  if (p.size() < 21) malformed("handshake", p);
  uint8_t proto = p[0];
  uint64_t lat = get_u64(p.data() + 1);
  uint64_t sync = get_u64(p.data() + 9);
  uint16_t nsub = get_u16(p.data() + 17);
  if (p.size() < 21u + 2u * nsub) malformed("handshake", p);
  std::set<uint16_t> peer_subs;
  for (uint16_t i = 0; i < nsub; i++)
    peer_subs.insert(get_u16(p.data() + 19 + 2 * i));
  uint16_t idlen = get_u16(p.data() + 19 + 2 * nsub);
  if (p.size() != 21u + 2u * nsub + idlen) malformed("handshake", p);
  peer_sim_id_.assign(p.begin() + 21 + 2 * nsub, p.end());

  std::ostringstream mismatch;
  if (proto != static_cast<uint8_t>(cfg.protocol))
    mismatch << " protocol " << protocol_name(cfg.protocol) << " vs peer "
             << protocol_name(static_cast<Protocol>(proto));
  if (lat != cfg.latency.ps)
    mismatch << " latency " << format_simtime(cfg.latency) << " vs peer "
             << format_simtime(SimTime(lat));
  if (sync != cfg.sync_interval.ps)
    mismatch << " sync_interval " << format_simtime(cfg.sync_interval)
             << " vs peer " << format_simtime(SimTime(sync));
  std::set<uint16_t> my_subs(subs.begin(), subs.end());
  if (peer_subs != my_subs)
    mismatch << " trunk sub-channel sets differ (ours " << my_subs.size()
             << ", peer " << peer_subs.size() << ")";
  if (!mismatch.str().empty())
    throw StartupError("adapter '" + id_ + "' (" + local_sim_id_ + " <-> " +
                       peer_sim_id_ + "): parameter mismatch:" +
                       mismatch.str());
  handshake_done_ = true;
}

void BaseAdapter::attach(Simulator& sim) {
  sim.attach_in(half_.in.get());
  sim.attach_out(half_.out.get());
  sim.register_adapter(id_, &counters_);
}

// ---------------------------------------------------------------------------
// EthAdapter / DeviceAdapter

void EthAdapter::send(SimTime now, const EthFrame& frame) {
  half_.out->send_data(now, frame.encode());
}

EthFrame EthAdapter::decode(const ChannelMessage& msg) const {
  return EthFrame::decode(msg.payload);
}

void DeviceAdapter::send(SimTime now, const DeviceMessage& msg) {
  if (msg.kind == DevOp::MMIORead || msg.kind == DevOp::DMARead) {
    DevOp expected = msg.kind == DevOp::MMIORead ? DevOp::MMIOReadResp
                                                 : DevOp::DMAComplete;
    auto [it, inserted] = outstanding_.emplace(msg.req_id, expected);
    (void)it;
    if (!inserted)
      throw ProtocolError("device adapter '" + id_ + "': request id " +
                          std::to_string(msg.req_id) + " already in flight");
  }
  half_.out->send_data(now, msg.encode());
}

DeviceMessage DeviceAdapter::receive(const ChannelMessage& msg) {
  DeviceMessage m = DeviceMessage::decode(msg.payload);
  if (m.kind == DevOp::MMIOReadResp || m.kind == DevOp::DMAComplete) {
    auto it = outstanding_.find(m.req_id);
    if (it == outstanding_.end())
      throw ProtocolError("device adapter '" + id_ + "': " +
                          dev_op_name(m.kind) + " for unknown request id " +
                          std::to_string(m.req_id));
    if (it->second != m.kind)
      throw ProtocolError("device adapter '" + id_ + "': request id " +
                          std::to_string(m.req_id) + " expected " +
                          dev_op_name(it->second) + ", got " +
                          dev_op_name(m.kind));
    outstanding_.erase(it);
  }
  return m;
}

// ---------------------------------------------------------------------------
// TrunkAdapter

void TrunkLogicalEndpoint::send(SimTime now,
                                const std::vector<uint8_t>& inner) {
  trunk_->send(sub_, now, inner);
}

SimTime TrunkLogicalEndpoint::input_horizon() const {
  return trunk_->in().input_horizon();
}

TrunkLogicalEndpoint* TrunkAdapter::register_sub(uint16_t sub_channel_id) {
  if (handshake_done_)
    throw ConfigError("trunk '" + id_ +
                      "': sub-channel registration after handshake");
  auto [it, inserted] = subs_.emplace(
      sub_channel_id,
      std::unique_ptr<TrunkLogicalEndpoint>(
          new TrunkLogicalEndpoint(this, sub_channel_id)));
  if (!inserted)
    throw ConfigError("trunk '" + id_ + "': duplicate sub-channel id " +
                      std::to_string(sub_channel_id));
  return it->second.get();
}

void TrunkAdapter::send(uint16_t sub_channel_id, SimTime now,
                        const std::vector<uint8_t>& inner) {
  if (!subs_.count(sub_channel_id))
    throw ConfigError("trunk '" + id_ + "': send on unregistered sub-channel " +
                      std::to_string(sub_channel_id));
  TrunkFrame f{sub_channel_id, inner};
  half_.out->send_data(now, f.encode());
}

TrunkFrame TrunkAdapter::demux(const ChannelMessage& msg) const {
  TrunkFrame f = TrunkFrame::decode(msg.payload);
  if (!subs_.count(f.sub_channel))
    throw ProtocolError("trunk '" + id_ + "': message for unregistered " +
                        "sub-channel " + std::to_string(f.sub_channel));
  return f;
}

std::vector<uint16_t> TrunkAdapter::handshake_sub_channels() const {
  std::vector<uint16_t> v;
  v.reserve(subs_.size());
  for (const auto& [id, ep] : subs_) v.push_back(id);
  return v;
}

}  // namespace splitsim
