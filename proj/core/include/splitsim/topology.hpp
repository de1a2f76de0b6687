#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "splitsim/simtime.hpp"

namespace splitsim {

enum class SwitchRole : uint8_t { Other = 0, Core, Agg, Tor, Edge };

struct SwitchSpec {
  uint32_t id = 0;  // dense index
  std::string name;
  uint32_t ports = 0;
  SwitchRole role = SwitchRole::Other;
  uint32_t group = 0;  // pod index (fat-tree) or agg index (core/agg/rack)
  uint32_t rack = 0;   // rack index within the group, for tor switches
};

struct HostSpec {
  uint32_t id = 0;  // dense index
  std::string name;
  uint32_t switch_id = 0;  // attachment switch
  uint32_t link_id = 0;    // the host<->switch link
};

struct NodeRef {
  enum Kind : uint8_t { Switch = 0, Host = 1 } kind = Switch;
  uint32_t idx = 0;
  bool operator==(const NodeRef&) const = default;
};

struct LinkSpec {
  uint32_t id = 0;
  NodeRef a, b;
  uint64_t bandwidth_bps = 0;
  SimTime latency;
};

// Switches, hosts, and links with bandwidth and latency. Hosts attach to
// exactly one switch; a switch port is consumed per incident link.
struct Topology {
  std::vector<SwitchSpec> switches;
  std::vector<HostSpec> hosts;
  std::vector<LinkSpec> links;

  // Connectivity, port occupancy, host attachment, positive link params.
  void validate() const;

  NodeRef far_end(const LinkSpec& l, NodeRef from) const {
    return l.a == from ? l.b : l.a;
  }
};

// Standard 3-level fat-tree: (k/2)^2 core switches, k pods of k/2 agg + k/2
// edge switches, hosts_per_edge hosts per edge switch. k must be even, >= 2.
Topology gen_fat_tree(uint32_t k, uint32_t hosts_per_edge,
                      uint64_t bandwidth_bps = 10000000000ull,
                      SimTime link_latency = SimTime::from_ns(500));

// Single core switch, `aggs` aggregation switches, `racks_per_agg` ToRs per
// aggregation switch, `hosts_per_rack` hosts per ToR. Core<->agg links run at
// core_bw, everything below at edge_bw.
Topology gen_car_topology(uint32_t aggs, uint32_t racks_per_agg,
                          uint32_t hosts_per_rack,
                          uint64_t core_bw = 100000000000ull,
                          uint64_t edge_bw = 10000000000ull,
                          SimTime link_latency = SimTime::from_ns(500));

// forwarding[switch][dst host] = link to follow. Shortest path; equal-cost
// ties resolved toward the smallest next-hop switch id, then the smallest
// link id, so the choice is stable across partitionings.
using ForwardingTables = std::vector<std::map<uint32_t, uint32_t>>;
ForwardingTables compute_routes(const Topology& topo);

struct Partition {
  std::vector<uint32_t> assignment;  // switch id -> partition index
  uint32_t count = 0;
  std::vector<uint32_t> cross_links;  // links spanning two partitions

  uint32_t of_switch(uint32_t sw) const { return assignment.at(sw); }
  uint32_t of_host(const Topology& t, uint32_t h) const {
    return assignment.at(t.hosts.at(h).switch_id);
  }
};

struct PartitionStrategy {
  enum Kind {
    Single,    // s: whole network as one process
    AggCore,   // ac: one per aggregation subtree, plus one for the core
    RackGroup, // crN: N racks per process, plus one for agg + core switches
    RackSep,   // rs: every switch its own process
    Custom,    // explicit assignment by switch name
  };
  Kind kind = Single;
  uint32_t group_size = 1;                   // N for crN
  std::map<std::string, uint32_t> custom;    // switch name -> partition

  static PartitionStrategy parse(const std::string& text);
  std::string name() const;
};

// Assigns every switch to a partition per the strategy and collects the cut
// links. Throws ConfigError when the strategy does not apply to the
// topology's shape.
Partition partition_topology(const Topology& topo,
                             const PartitionStrategy& strategy);

}  // namespace splitsim
