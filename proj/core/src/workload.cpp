#include "splitsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "splitsim/adapters.hpp"
#include "splitsim/errors.hpp"

namespace splitsim {

namespace {
constexpr uint32_t kAppHeader = 28;
constexpr uint32_t kFraming = EthFrame::kFramingOverhead;
}  // namespace

void AppSpec::validate(const std::string& where) const {
  if (role == Role::Client) {
    if (load_rps <= 0)
      throw ConfigError(where + ": client offered load must be > 0");
    if (target.empty())
      throw ConfigError(where + ": client needs a target host");
    for (uint32_t sz : {request_bytes, response_bytes}) {
      if (sz < kAppHeader + kFraming || sz > EthFrame::kMaxWire)
        throw ConfigError(where + ": request/response wire size " +
                          std::to_string(sz) + " outside [" +
                          std::to_string(kAppHeader + kFraming) + ", " +
                          std::to_string(EthFrame::kMaxWire) + "]");
    }
    if (write_fraction < 0 || write_fraction > 1)
      throw ConfigError(where + ": write fraction must be within [0, 1]");
    if (key_dist == KeyDist::Zipf && (zipf_s <= 0 || key_space == 0))
      throw ConfigError(where + ": zipf needs s > 0 and a nonempty key space");
    if (key_space == 0)
      throw ConfigError(where + ": key space must be nonempty");
  }
}

std::vector<uint8_t> encode_app_payload(const AppMsg& msg,
                                        uint32_t wire_bytes) {
  uint32_t payload_len =
      wire_bytes > kFraming ? wire_bytes - kFraming : kAppHeader;
  if (payload_len < kAppHeader) payload_len = kAppHeader;
  std::vector<uint8_t> p(payload_len, 0);
  p[0] = msg.is_response ? 1 : 0;
  p[1] = msg.is_write ? 1 : 0;
  std::memcpy(p.data() + 4, &msg.client_app, 4);
  std::memcpy(p.data() + 8, &msg.req_id, 8);
  std::memcpy(p.data() + 16, &msg.key, 8);
  std::memcpy(p.data() + 24, &msg.response_bytes, 4);
  return p;
}

AppMsg decode_app_payload(const std::vector<uint8_t>& payload) {
  if (payload.size() < kAppHeader)
    throw ProtocolError("application payload too short (" +
                        std::to_string(payload.size()) + "B)");
  AppMsg m;
  m.is_response = payload[0] != 0;
  m.is_write = payload[1] != 0;
  std::memcpy(&m.client_app, payload.data() + 4, 4);
  std::memcpy(&m.req_id, payload.data() + 8, 8);
  std::memcpy(&m.key, payload.data() + 16, 8);
  std::memcpy(&m.response_bytes, payload.data() + 24, 4);
  return m;
}

std::array<uint8_t, 6> mac_of_host(uint32_t host_idx) {
  return {0x02, 0x53, 0x53,  // locally administered
          static_cast<uint8_t>(host_idx >> 16),
          static_cast<uint8_t>(host_idx >> 8),
          static_cast<uint8_t>(host_idx)};
}

std::optional<uint32_t> host_of_mac(const std::array<uint8_t, 6>& mac) {
  if (mac[0] != 0x02 || mac[1] != 0x53 || mac[2] != 0x53) return std::nullopt;
  return (static_cast<uint32_t>(mac[3]) << 16) |
         (static_cast<uint32_t>(mac[4]) << 8) | mac[5];
}

ClientWorkload::ClientWorkload(const AppSpec& spec, uint64_t seed,
                               uint32_t app_id)
    : spec_(spec),
      app_id_(app_id),
      arrival_rng_(seed, (static_cast<uint64_t>(app_id) << 2) | 0),
      key_rng_(seed, (static_cast<uint64_t>(app_id) << 2) | 1),
      write_rng_(seed, (static_cast<uint64_t>(app_id) << 2) | 2) {
  spec.validate("app " + std::to_string(app_id));
  if (spec.key_dist == AppSpec::KeyDist::Zipf)
    zipf_.emplace(spec.zipf_s, spec.key_space);
  double gap_ps = 1e12 / spec.load_rps;
  fixed_gap_ = SimTime(static_cast<uint64_t>(std::llround(gap_ps)));
  if (fixed_gap_ == SimTime::zero()) fixed_gap_ = SimTime(1);
}

SimTime ClientWorkload::next_interarrival() {
  if (spec_.arrival == AppSpec::Arrival::FixedRate) return fixed_gap_;
  double gap = arrival_rng_.next_exponential(1e12 / spec_.load_rps);
  uint64_t ps = static_cast<uint64_t>(std::llround(gap));
  return SimTime(ps ? ps : 1);
}

AppMsg ClientWorkload::make_request() {
  AppMsg m;
  m.is_response = false;
  m.client_app = app_id_;
  m.req_id = next_req_id_++;
  m.key = zipf_ ? zipf_->sample(key_rng_)
                : key_rng_.next_below(spec_.key_space) + 1;
  m.is_write = spec_.write_fraction > 0 &&
               write_rng_.next_double() < spec_.write_fraction;
  m.response_bytes = spec_.response_bytes;
  return m;
}

LatencyStats summarize_latency(std::vector<uint64_t> ns_values) {
  LatencyStats s;
  s.count = ns_values.size();
  if (ns_values.empty()) return s;
  std::sort(ns_values.begin(), ns_values.end());
  long double sum = 0;
  for (uint64_t v : ns_values) sum += v;
  s.mean_ns = static_cast<double>(sum / ns_values.size());
  auto pct = [&](double q) {
    size_t idx = static_cast<size_t>(q * (ns_values.size() - 1) + 0.5);
    return static_cast<double>(ns_values[std::min(idx, ns_values.size() - 1)]);
  };
  s.p50_ns = pct(0.50);
  s.p99_ns = pct(0.99);
  return s;
}

}  // namespace splitsim
