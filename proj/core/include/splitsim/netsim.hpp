#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "splitsim/adapters.hpp"
#include "splitsim/event_loop.hpp"
#include "splitsim/topology.hpp"
#include "splitsim/workload.hpp"

namespace splitsim {

// Order-independent fold over (packet id, hop, timestamp) records, so the
// digest is identical no matter how the records are spread over partitions.
struct TraceAccumulator {
  uint64_t records = 0;
  uint64_t xor_acc = 0;
  uint64_t sum_acc = 0;

  void add(uint64_t pkt, uint64_t place, uint64_t t_ps);
  void merge(const TraceAccumulator& o);
  uint64_t digest() const;
  bool operator==(const TraceAccumulator&) const = default;
};

struct FlowCounters {
  uint64_t requests_sent = 0;
  uint64_t requests_delivered = 0;
  uint64_t responses_sent = 0;
  uint64_t responses_delivered = 0;
  uint64_t dropped = 0;
  uint64_t bytes_delivered = 0;  // response wire bytes at the client
  std::vector<uint64_t> latency_ns;
};

struct NetStats {
  std::map<uint32_t, FlowCounters> flows;  // keyed by client app (host) id
  uint64_t switch_drops = 0;
  uint64_t unknown_dst_drops = 0;
  TraceAccumulator trace;
};

// Packet with partition-independent identity. On cut links it travels as
// {link 4B, seq 8B, pkt id 8B, flow 4B, deliver_at 8B, frame bytes}.
struct NetPacket {
  uint64_t pkt_id = 0;
  uint32_t flow = 0;
  EthFrame frame;

  uint32_t wire_len() const { return frame.wire_length(); }
};

struct CutPacket {
  NetPacket pkt;
  uint32_t link = 0;
  uint64_t seq = 0;
  SimTime deliver_at;

  static std::vector<uint8_t> encode(const NetPacket& pkt, uint32_t link,
                                     uint64_t seq, SimTime deliver_at);
  static CutPacket decode(const std::vector<uint8_t>& bytes);
};

struct NetSimConfig {
  std::string sim_id;
  uint64_t seed = 1;
  uint32_t my_partition = 0;
  uint64_t queue_capacity_bytes = 512 * 1024;  // per output port
  std::map<uint32_t, AppSpec> apps;  // host idx -> app (abstract hosts)
  std::set<uint32_t> detailed_hosts;  // hosts simulated externally
  // Observer for per-switch packet commits (pkt id, switch, time);
  // diagnostics and tests only, no simulation effect.
  std::function<void(uint64_t, uint32_t, SimTime)> hop_observer;
};

// One network partition: drop-tail store-and-forward switches, abstract
// protocol-level applications, and trunked channels toward peer partitions
// and detailed-host NICs.
class NetSimulator : public Simulator {
 public:
  NetSimulator(NetSimConfig cfg, const Topology& topo,
               const ForwardingTables& routes, const Partition& part);

  // Wiring, before the loop runs. Trunk sub-channel ids are link ids; the
  // same registration happens on both ends and the handshake verifies it.
  void attach_cut_trunk(TrunkAdapter* trunk,
                        const std::vector<uint32_t>& links);
  void attach_host_eth(uint32_t host_idx, EthAdapter* eth);
  // Throws StartupError if a cut link or detailed host lacks its channel.
  void verify_wiring() const;

  // Schedules client arrival processes; call once before running.
  void prime();

  const NetStats& stats() const { return stats_; }
  void write_stats(std::ostream& os) const;

  // Direct single-packet injection hook for switch-model unit tests.
  void test_inject(uint32_t sw, uint32_t in_link, uint64_t seq,
                   NetPacket pkt, SimTime at);

 protected:
  void on_channel_message(InEndpoint& ep, ChannelMessage msg) override;
  void on_timestep_complete(SimTime t) override;

 private:
  struct PortState {
    SimTime busy_until;
    uint64_t occupancy = 0;
  };
  struct Pending {
    uint32_t link;
    uint64_t seq;
    NetPacket pkt;
  };
  struct ClientState {
    std::unique_ptr<ClientWorkload> workload;
    uint32_t target = 0;
    std::map<uint64_t, SimTime> outstanding;  // req id -> issue time
  };
  struct ServerState {
    SimTime busy_until;
    uint64_t egress_events = 0;
  };

  uint64_t port_key(uint32_t link, NodeRef sender) const;
  PortState& port(uint32_t link, NodeRef sender);
  bool local_switch(uint32_t sw) const {
    return part_.assignment[sw] == cfg_.my_partition;
  }

  void deposit(NodeRef node, uint32_t link, uint64_t seq, NetPacket pkt);
  void schedule_arrival(NodeRef node, uint32_t link, uint64_t seq,
                        NetPacket pkt, SimTime at);
  void commit_switch(uint32_t sw, std::vector<Pending>& items, SimTime t);
  void commit_host(uint32_t host, std::vector<Pending>& items, SimTime t);
  // Store-and-forward egress: queues the packet on (link, sender), assigns
  // the per-direction seq, schedules the wire departure.
  void egress(uint32_t link, NodeRef sender, NetPacket pkt, SimTime t);
  void transmit(uint32_t link, NodeRef sender, uint64_t seq, NetPacket pkt,
                SimTime departure);
  void issue_request(uint32_t host, SimTime t);
  void send_from_host(uint32_t host, const AppMsg& msg, uint32_t wire_bytes,
                      uint32_t dst_host, SimTime t);

  NetSimConfig cfg_;
  const Topology& topo_;
  const ForwardingTables& routes_;
  const Partition& part_;

  std::map<uint64_t, PortState> ports_;
  std::map<uint64_t, uint64_t> tx_seq_;             // per (link, direction)
  std::map<uint64_t, std::vector<Pending>> pending_;  // node key -> arrivals
  std::map<uint32_t, ClientState> clients_;
  std::map<uint32_t, ServerState> servers_;

  std::map<std::string, TrunkAdapter*> trunk_by_channel_;
  std::map<uint32_t, TrunkLogicalEndpoint*> cut_link_ep_;    // link id
  std::map<uint32_t, EthAdapter*> eth_by_host_;
  std::map<std::string, uint32_t> host_by_channel_;

  NetStats stats_;
};

// Serialization delay for `bytes` at `bandwidth_bps`, rounded up to a tick.
SimTime wire_time(uint32_t bytes, uint64_t bandwidth_bps);

}  // namespace splitsim
