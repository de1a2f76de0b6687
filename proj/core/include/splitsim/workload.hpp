#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "splitsim/rng.hpp"
#include "splitsim/simtime.hpp"

namespace splitsim {

// Protocol-level application model shared by abstract (in-network) hosts and
// detailed host simulators: a request/response client or a server.
struct AppSpec {
  enum class Role { Client, Server } role = Role::Server;

  // client
  std::string target;  // destination host name
  double load_rps = 0;
  enum class Arrival { FixedRate, Poisson } arrival = Arrival::FixedRate;
  uint32_t request_bytes = 128;    // wire bytes per request frame
  uint32_t response_bytes = 128;   // wire bytes per response frame
  enum class KeyDist { Uniform, Zipf } key_dist = KeyDist::Uniform;
  double zipf_s = 1.0;
  uint64_t key_space = 1;
  double write_fraction = 0.0;

  // server (abstract): per-request service time, 0 = protocol-level ideal
  SimTime service_time;

  void validate(const std::string& where) const;
};

// On-wire application header carried inside the Ethernet payload.
struct AppMsg {
  bool is_response = false;
  bool is_write = false;
  uint32_t client_app = 0;  // flow id: the issuing client's app id
  uint64_t req_id = 0;
  uint64_t key = 0;
  uint32_t response_bytes = 0;  // how large a response the client expects
};

// Serializes the header padded out so the enclosing frame has exactly
// `wire_bytes` bytes on the wire (wire = payload + 24B framing, >= 64).
std::vector<uint8_t> encode_app_payload(const AppMsg& msg,
                                        uint32_t wire_bytes);
AppMsg decode_app_payload(const std::vector<uint8_t>& payload);

// Packet identity: flow id and request counter, response bit in the low bit.
inline uint64_t packet_id(uint32_t client_app, uint64_t req_id,
                          bool is_response) {
  return (static_cast<uint64_t>(client_app) << 32) | (req_id << 1) |
         (is_response ? 1 : 0);
}

std::array<uint8_t, 6> mac_of_host(uint32_t host_idx);
std::optional<uint32_t> host_of_mac(const std::array<uint8_t, 6>& mac);

// Deterministic open-loop request generator. All draws come from a
// counter-based stream keyed by (seed, app id), so the sequence is identical
// regardless of partitioning or process layout.
class ClientWorkload {
 public:
  ClientWorkload(const AppSpec& spec, uint64_t seed, uint32_t app_id);

  SimTime next_interarrival();
  AppMsg make_request();

  uint64_t issued() const { return next_req_id_; }

 private:
  AppSpec spec_;
  uint32_t app_id_;
  CounterRng arrival_rng_;
  CounterRng key_rng_;
  CounterRng write_rng_;
  std::optional<ZipfSampler> zipf_;
  uint64_t next_req_id_ = 0;
  SimTime fixed_gap_;
};

// Latency bookkeeping shared by clients of both fidelities.
struct LatencySample {
  uint64_t req_id = 0;
  SimTime issue;
  SimTime completion;
};

struct LatencyStats {
  uint64_t count = 0;
  double mean_ns = 0;
  double p50_ns = 0;
  double p99_ns = 0;
};

LatencyStats summarize_latency(std::vector<uint64_t> ns_values);

}  // namespace splitsim
