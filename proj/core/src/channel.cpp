#include "splitsim/channel.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstring>
#include <sstream>

#include "splitsim/errors.hpp"
#include "splitsim/spin.hpp"

namespace splitsim {

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::Ethernet:
      return "ethernet";
    case Protocol::Device:
      return "device";
    case Protocol::Trunk:
      return "trunk";
  }
  return "?";
}

void ChannelConfig::validate() const {
  if (latency == SimTime::zero())
    throw ConfigError("channel '" + channel_id + "': latency must be > 0");
  if (sync_interval == SimTime::zero())
    throw ConfigError("channel '" + channel_id +
                      "': sync_interval must be > 0");
  if (sync_interval > latency)
    throw ConfigError("channel '" + channel_id + "': sync_interval " +
                      format_simtime(sync_interval) + " exceeds latency " +
                      format_simtime(latency) +
                      " (receiver could stall past the promise horizon)");
}

// ---------------------------------------------------------------------------
// In-memory SPSC transport

namespace {

class MemTransport final : public DirectedTransport {
 public:
  MemTransport(uint32_t slots, uint32_t max_payload)
      : mask_(round_pow2(slots) - 1),
        ring_(static_cast<size_t>(mask_) + 1),
        max_payload_(max_payload) {}

  bool try_push(MsgKind kind, SimTime send_time, const uint8_t* payload,
                uint32_t len) override {
    uint64_t tail = tail_.load(std::memory_order_relaxed);
    if (tail - head_.load(std::memory_order_acquire) > mask_) return false;
    Slot& s = ring_[tail & mask_];
    s.kind = kind;
    s.send_time = send_time;
    s.payload.assign(payload, payload + len);
    tail_.store(tail + 1, std::memory_order_release);
    return true;
  }

  bool try_pop(ChannelMessage& out) override {
    uint64_t head = head_.load(std::memory_order_relaxed);
    if (head == tail_.load(std::memory_order_acquire)) return false;
    Slot& s = ring_[head & mask_];
    out.kind = s.kind;
    out.send_time = s.send_time;
    out.payload = std::move(s.payload);
    head_.store(head + 1, std::memory_order_release);
    return true;
  }

  void close_producer() override {
    closed_.store(true, std::memory_order_release);
  }
  bool producer_closed() const override {
    return closed_.load(std::memory_order_acquire);
  }
  uint32_t max_payload() const override { return max_payload_; }

 private:
  struct Slot {
    MsgKind kind;
    SimTime send_time;
    std::vector<uint8_t> payload;
  };

  static uint32_t round_pow2(uint32_t v) {
    uint32_t p = 1;
    while (p < v) p <<= 1;
    return p;
  }

  uint64_t mask_;
  std::vector<Slot> ring_;
  uint32_t max_payload_;
  alignas(64) std::atomic<uint64_t> head_{0};
  alignas(64) std::atomic<uint64_t> tail_{0};
  std::atomic<bool> closed_{false};
};

}  // namespace

std::shared_ptr<DirectedTransport> make_mem_transport(uint32_t slots,
                                                      uint32_t max_payload) {
  return std::make_shared<MemTransport>(slots, max_payload);
}

// ---------------------------------------------------------------------------
// Shared-memory transport

namespace {

// Spec-fixed header, bit-exact within one host.
struct ShmHeader {
  char magic[8];
  uint32_t version;
  uint32_t slot_count;
  uint32_t slot_size;
  uint32_t pad0;
  uint64_t latency_ps;
  uint64_t sync_interval_ps;
};
static_assert(sizeof(ShmHeader) == 40);

constexpr char kMagic[8] = {'S', 'P', 'L', 'T', 'S', 'I', 'M', '1'};
constexpr uint32_t kShmVersion = 1;
constexpr size_t kSlotHeader = 13;  // kind 1B + send_time 8B + len 4B

struct DirCtl {
  alignas(64) std::atomic<uint64_t> tail;
  alignas(64) std::atomic<uint64_t> head;
  alignas(64) std::atomic<uint32_t> closed;
  std::atomic<uint32_t> ready;
};
static_assert(sizeof(DirCtl) == 192);

constexpr size_t kHeaderArea = 64;
constexpr size_t kCtlArea = 2 * sizeof(DirCtl);

size_t segment_size(uint32_t slot_count, uint32_t slot_size) {
  return kHeaderArea + kCtlArea +
         2 * static_cast<size_t>(slot_count) * slot_size;
}

struct Mapping {
  void* base = nullptr;
  size_t len = 0;
  ~Mapping() {
    if (base) munmap(base, len);
  }
};

class ShmTransport final : public DirectedTransport {
 public:
  ShmTransport(std::shared_ptr<Mapping> map, int dir, bool is_producer)
      : map_(std::move(map)), producer_(is_producer) {
    auto* hdr = static_cast<ShmHeader*>(map_->base);
    slot_count_ = hdr->slot_count;
    slot_size_ = hdr->slot_size;
    ctl_ = reinterpret_cast<DirCtl*>(static_cast<char*>(map_->base) +
                                     kHeaderArea) +
           dir;
    slots_ = static_cast<char*>(map_->base) + kHeaderArea + kCtlArea +
             static_cast<size_t>(dir) * slot_count_ * slot_size_;
  }

  ~ShmTransport() override {
    if (producer_) close_producer();
  }

  bool try_push(MsgKind kind, SimTime send_time, const uint8_t* payload,
                uint32_t len) override {
    uint64_t tail = ctl_->tail.load(std::memory_order_relaxed);
    if (tail - ctl_->head.load(std::memory_order_acquire) >= slot_count_)
      return false;
    char* slot = slots_ + (tail % slot_count_) * slot_size_;
    uint8_t k = static_cast<uint8_t>(kind);
    uint64_t st = send_time.ps;
    std::memcpy(slot, &k, 1);
    std::memcpy(slot + 1, &st, 8);
    std::memcpy(slot + 9, &len, 4);
    if (len) std::memcpy(slot + kSlotHeader, payload, len);
    ctl_->tail.store(tail + 1, std::memory_order_release);
    return true;
  }

  bool try_pop(ChannelMessage& out) override {
    uint64_t head = ctl_->head.load(std::memory_order_relaxed);
    if (head == ctl_->tail.load(std::memory_order_acquire)) return false;
    const char* slot = slots_ + (head % slot_count_) * slot_size_;
    uint8_t k;
    uint64_t st;
    uint32_t len;
    std::memcpy(&k, slot, 1);
    std::memcpy(&st, slot + 1, 8);
    std::memcpy(&len, slot + 9, 4);
    if (len > slot_size_ - kSlotHeader)
      throw ProtocolError("corrupt shm slot: payload length " +
                          std::to_string(len));
    out.kind = static_cast<MsgKind>(k);
    out.send_time = SimTime(st);
    out.payload.assign(slot + kSlotHeader, slot + kSlotHeader + len);
    ctl_->head.store(head + 1, std::memory_order_release);
    return true;
  }

  void close_producer() override {
    ctl_->closed.store(1, std::memory_order_release);
  }
  bool producer_closed() const override {
    return ctl_->closed.load(std::memory_order_acquire) != 0;
  }
  uint32_t max_payload() const override {
    return slot_size_ - static_cast<uint32_t>(kSlotHeader);
  }

 private:
  std::shared_ptr<Mapping> map_;
  DirCtl* ctl_;
  char* slots_;
  uint32_t slot_count_;
  uint32_t slot_size_;
  bool producer_;
};

std::shared_ptr<Mapping> map_segment(int fd, size_t len) {
  auto m = std::make_shared<Mapping>();
  m->base = mmap(nullptr, len, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
  m->len = len;
  if (m->base == MAP_FAILED) {
    m->base = nullptr;
    throw StartupError("mmap of channel segment failed");
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Endpoints

OutEndpoint::OutEndpoint(ChannelConfig cfg,
                         std::shared_ptr<DirectedTransport> tx)
    : cfg_(std::move(cfg)), tx_(std::move(tx)) {}

OutEndpoint::~OutEndpoint() { close(); }

void OutEndpoint::push_blocking(MsgKind kind, SimTime send_time,
                                const uint8_t* payload, uint32_t len) {
  if (len > tx_->max_payload())
    throw ProtocolError("channel '" + cfg_.channel_id + "': payload " +
                        std::to_string(len) + " bytes exceeds slot capacity " +
                        std::to_string(tx_->max_payload()));
  if (tx_->try_push(kind, send_time, payload, len)) return;
  // Ring full: the peer is behind. Wait for it to drain, bounded.
  SpinBackoff backoff;
  auto start = std::chrono::steady_clock::now();
  while (!tx_->try_push(kind, send_time, payload, len)) {
    backoff.pause();
    if (std::chrono::steady_clock::now() - start >
        std::chrono::seconds(60))
      throw ChannelClosedError("channel '" + cfg_.channel_id +
                               "': peer stopped draining (ring full for 60s)");
  }
}

void OutEndpoint::send_data(SimTime now, const uint8_t* payload, size_t len) {
  if (sent_anything_ && now < last_send_time_)
    throw ProtocolError("channel '" + cfg_.channel_id +
                        "': send_time regression " + format_simtime(now) +
                        " after " + format_simtime(last_send_time_));
  uint64_t t0 = 0;
  if (profiling_ && counters_) t0 = wall_cycles();
  push_blocking(MsgKind::Data, now, payload, static_cast<uint32_t>(len));
  last_send_time_ = now;
  last_sync_sent_ = now;  // a data message doubles as a sync
  sent_anything_ = true;
  if (counters_) {
    counters_->data_tx++;
    if (profiling_) counters_->cycles_tx += wall_cycles() - t0;
  }
}

bool OutEndpoint::maybe_send_sync(SimTime now) {
  // Emit at cadence points, not at `now`: a clock that jumps several
  // intervals still produces exactly one sync per elapsed interval, which
  // keeps sync counts a pure function of simulated time.
  bool sent = false;
  for (;;) {
    SimTime next = last_sync_sent_ + cfg_.sync_interval;
    if (next > now) break;
    flush_sync(next);
    sent = true;
  }
  return sent;
}

void OutEndpoint::flush_sync(SimTime now) {
  if (sent_anything_ && last_sync_sent_ == now) return;  // already promised
  if (sent_anything_ && now < last_send_time_)
    throw ProtocolError("channel '" + cfg_.channel_id +
                        "': sync regression " + format_simtime(now));
  push_blocking(MsgKind::Sync, now, nullptr, 0);
  last_send_time_ = now;
  last_sync_sent_ = now;
  sent_anything_ = true;
  if (counters_) counters_->syncs_tx++;
}

void OutEndpoint::send_handshake(const std::vector<uint8_t>& payload) {
  push_blocking(MsgKind::Handshake, SimTime::zero(), payload.data(),
                static_cast<uint32_t>(payload.size()));
}

void OutEndpoint::close() {
  if (!closed_ && tx_) {
    tx_->close_producer();
    closed_ = true;
  }
}

InEndpoint::InEndpoint(ChannelConfig cfg,
                       std::shared_ptr<DirectedTransport> rx)
    : cfg_(std::move(cfg)),
      rx_(std::move(rx)),
      peer_horizon_(cfg_.latency) {}

void InEndpoint::poll() {
  ChannelMessage m;
  while (rx_->try_pop(m)) {
    if (m.kind == MsgKind::Handshake) {
      handshake_ = std::move(m.payload);
      continue;
    }
    if (m.send_time < last_recv_send_time_)
      throw ProtocolError("channel '" + cfg_.channel_id +
                          "': peer send_time regression " +
                          format_simtime(m.send_time) + " after " +
                          format_simtime(last_recv_send_time_));
    last_recv_send_time_ = m.send_time;
    SimTime promised = m.send_time + cfg_.latency;
    if (promised > peer_horizon_) peer_horizon_ = promised;
    if (m.kind == MsgKind::Sync) {
      if (counters_) counters_->syncs_rx++;
    } else {
      m.seq = next_seq_++;
      inbox_.push_back(std::move(m));
    }
  }
  if (!tx_closed_ && rx_->producer_closed()) tx_closed_ = true;
}

SimTime InEndpoint::front_delivery() const {
  return inbox_.front().delivery_time(cfg_.latency);
}

ChannelMessage InEndpoint::pop() {
  ChannelMessage m = std::move(inbox_.front());
  inbox_.pop_front();
  if (counters_) counters_->data_rx++;
  return m;
}

std::optional<std::vector<uint8_t>> InEndpoint::take_handshake() {
  auto h = std::move(handshake_);
  handshake_.reset();
  return h;
}

bool InEndpoint::exhausted() const { return tx_closed_ && inbox_.empty(); }

// ---------------------------------------------------------------------------
// Channel construction

EndpointPair create_channel(const ChannelConfig& config) {
  config.validate();
  auto tx = make_mem_transport(4096, 2048);
  EndpointPair pair;
  pair.out = std::make_unique<OutEndpoint>(config, tx);
  pair.in = std::make_unique<InEndpoint>(config, tx);
  return pair;
}

std::pair<ChannelHalf, ChannelHalf> create_duplex_channel(
    const ChannelConfig& config, uint32_t slots, uint32_t max_payload) {
  config.validate();
  auto ab = make_mem_transport(slots, max_payload);
  auto ba = make_mem_transport(slots, max_payload);
  ChannelHalf a{std::make_unique<OutEndpoint>(config, ab),
                std::make_unique<InEndpoint>(config, ba)};
  ChannelHalf b{std::make_unique<OutEndpoint>(config, ba),
                std::make_unique<InEndpoint>(config, ab)};
  return {std::move(a), std::move(b)};
}

ChannelHalf ShmChannel::create(const std::string& shm_name,
                               const ChannelConfig& config, uint32_t slots,
                               uint32_t max_payload) {
  config.validate();
  uint32_t slot_size = static_cast<uint32_t>(kSlotHeader) + max_payload;
  size_t len = segment_size(slots, slot_size);

  int fd = shm_open(shm_name.c_str(), O_CREAT | O_EXCL | O_RDWR, 0600);
  if (fd < 0)
    throw StartupError("shm_open('" + shm_name +
                       "') failed (segment collision or permissions)");
  if (ftruncate(fd, static_cast<off_t>(len)) != 0) {
    ::close(fd);
    shm_unlink(shm_name.c_str());
    throw StartupError("ftruncate of channel segment failed");
  }
  auto map = map_segment(fd, len);
  ::close(fd);

  auto* hdr = static_cast<ShmHeader*>(map->base);
  std::memcpy(hdr->magic, kMagic, 8);
  hdr->version = kShmVersion;
  hdr->slot_count = slots;
  hdr->slot_size = slot_size;
  hdr->pad0 = 0;
  hdr->latency_ps = config.latency.ps;
  hdr->sync_interval_ps = config.sync_interval.ps;

  auto* ctl = reinterpret_cast<DirCtl*>(static_cast<char*>(map->base) +
                                        kHeaderArea);
  for (int d = 0; d < 2; d++) {
    ctl[d].tail.store(0);
    ctl[d].head.store(0);
    ctl[d].closed.store(0);
    ctl[d].ready.store(0);
  }
  ctl[0].ready.store(1, std::memory_order_release);

  ChannelHalf half;
  half.out = std::make_unique<OutEndpoint>(
      config, std::make_shared<ShmTransport>(map, 0, true));
  half.in = std::make_unique<InEndpoint>(
      config, std::make_shared<ShmTransport>(map, 1, false));
  return half;
}

ChannelHalf ShmChannel::open(const std::string& shm_name,
                             const ChannelConfig& config,
                             uint64_t timeout_ms) {
  config.validate();
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::milliseconds(timeout_ms);
  int fd = -1;
  SpinBackoff backoff;
  for (;;) {
    fd = shm_open(shm_name.c_str(), O_RDWR, 0600);
    if (fd >= 0) break;
    if (std::chrono::steady_clock::now() > deadline)
      throw StartupError("timed out waiting for channel segment '" +
                         shm_name + "'");
    backoff.pause();
  }
  struct stat st{};
  while (fstat(fd, &st) == 0 && st.st_size < static_cast<off_t>(kHeaderArea)) {
    if (std::chrono::steady_clock::now() > deadline) {
      ::close(fd);
      throw StartupError("channel segment '" + shm_name + "' never sized");
    }
    backoff.pause();
  }

  // Map the header first to learn the geometry.
  ShmHeader probe{};
  {
    void* p = mmap(nullptr, sizeof(ShmHeader), PROT_READ, MAP_SHARED, fd, 0);
    if (p == MAP_FAILED) {
      ::close(fd);
      throw StartupError("mmap of channel header failed");
    }
    std::memcpy(&probe, p, sizeof(probe));
    munmap(p, sizeof(ShmHeader));
  }
  if (std::memcmp(probe.magic, kMagic, 8) != 0) {
    ::close(fd);
    throw StartupError("channel segment '" + shm_name + "': bad magic");
  }
  if (probe.version != kShmVersion) {
    ::close(fd);
    throw StartupError("channel segment '" + shm_name +
                       "': version mismatch");
  }
  if (probe.latency_ps != config.latency.ps ||
      probe.sync_interval_ps != config.sync_interval.ps) {
    std::ostringstream os;
    os << "channel '" << config.channel_id
       << "': parameter mismatch: peer has latency="
       << format_simtime(SimTime(probe.latency_ps))
       << " sync_interval=" << format_simtime(SimTime(probe.sync_interval_ps))
       << ", ours latency=" << format_simtime(config.latency)
       << " sync_interval=" << format_simtime(config.sync_interval);
    ::close(fd);
    throw StartupError(os.str());
  }

  size_t len = segment_size(probe.slot_count, probe.slot_size);
  auto map = map_segment(fd, len);
  ::close(fd);

  auto* ctl = reinterpret_cast<DirCtl*>(static_cast<char*>(map->base) +
                                        kHeaderArea);
  while (ctl[0].ready.load(std::memory_order_acquire) == 0) {
    if (std::chrono::steady_clock::now() > deadline)
      throw StartupError("channel segment '" + shm_name +
                         "' never became ready");
    backoff.pause();
  }

  ChannelHalf half;
  half.out = std::make_unique<OutEndpoint>(
      config, std::make_shared<ShmTransport>(map, 1, true));
  half.in = std::make_unique<InEndpoint>(
      config, std::make_shared<ShmTransport>(map, 0, false));
  return half;
}

void ShmChannel::unlink(const std::string& shm_name) {
  shm_unlink(shm_name.c_str());
}

}  // namespace splitsim
