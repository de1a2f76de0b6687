#include "splitsim/topology.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

#include "splitsim/errors.hpp"

namespace splitsim {

void Topology::validate() const {
  if (switches.empty()) throw ConfigError("topology has no switches");
  std::vector<uint32_t> occupancy(switches.size(), 0);
  for (const auto& l : links) {
    if (l.latency == SimTime::zero())
      throw ConfigError("link " + std::to_string(l.id) +
                        ": latency must be > 0");
    if (l.bandwidth_bps == 0)
      throw ConfigError("link " + std::to_string(l.id) +
                        ": bandwidth must be > 0");
    for (NodeRef n : {l.a, l.b}) {
      if (n.kind == NodeRef::Switch) {
        if (n.idx >= switches.size())
          throw ConfigError("link " + std::to_string(l.id) +
                            " references unknown switch");
        occupancy[n.idx]++;
      } else if (n.idx >= hosts.size()) {
        throw ConfigError("link " + std::to_string(l.id) +
                          " references unknown host");
      }
    }
  }
  for (size_t i = 0; i < switches.size(); i++)
    if (occupancy[i] > switches[i].ports)
      throw ConfigError("switch '" + switches[i].name + "' uses " +
                        std::to_string(occupancy[i]) + " ports, has " +
                        std::to_string(switches[i].ports));
  for (const auto& h : hosts) {
    if (h.switch_id >= switches.size())
      throw ConfigError("host '" + h.name + "' attaches to unknown switch");
    const auto& l = links.at(h.link_id);
    bool touches_host = (l.a.kind == NodeRef::Host && l.a.idx == h.id) ||
                        (l.b.kind == NodeRef::Host && l.b.idx == h.id);
    if (!touches_host)
      throw ConfigError("host '" + h.name + "' attachment link mismatch");
  }
  // Connectivity over the switch graph.
  if (switches.size() > 1) {
    std::vector<char> seen(switches.size(), 0);
    std::deque<uint32_t> work{0};
    seen[0] = 1;
    size_t reached = 1;
    while (!work.empty()) {
      uint32_t s = work.front();
      work.pop_front();
      for (const auto& l : links) {
        if (l.a.kind != NodeRef::Switch || l.b.kind != NodeRef::Switch)
          continue;
        uint32_t o;
        if (l.a.idx == s)
          o = l.b.idx;
        else if (l.b.idx == s)
          o = l.a.idx;
        else
          continue;
        if (!seen[o]) {
          seen[o] = 1;
          reached++;
          work.push_back(o);
        }
      }
    }
    if (reached != switches.size()) {
      std::ostringstream os;
      os << "topology is disconnected; unreachable from '"
         << switches[0].name << "':";
      for (size_t i = 0; i < switches.size(); i++)
        if (!seen[i]) os << " '" << switches[i].name << "'";
      throw ConfigError(os.str());
    }
  }
}

Topology gen_fat_tree(uint32_t k, uint32_t hosts_per_edge,
                      uint64_t bandwidth_bps, SimTime link_latency) {
  if (k < 2 || k % 2 != 0)
    throw ConfigError("fat-tree k must be even and >= 2, got " +
                      std::to_string(k));
  Topology t;
  uint32_t half = k / 2;
  auto add_switch = [&](const std::string& name, SwitchRole role,
                        uint32_t group, uint32_t rack) {
    uint32_t id = static_cast<uint32_t>(t.switches.size());
    t.switches.push_back({id, name, k, role, group, rack});
    return id;
  };
  auto add_link = [&](NodeRef a, NodeRef b) {
    uint32_t id = static_cast<uint32_t>(t.links.size());
    t.links.push_back({id, a, b, bandwidth_bps, link_latency});
    return id;
  };

  // core[i][j], i = which agg position it serves
  std::vector<std::vector<uint32_t>> core(half, std::vector<uint32_t>(half));
  for (uint32_t i = 0; i < half; i++)
    for (uint32_t j = 0; j < half; j++)
      core[i][j] = add_switch(
          "core" + std::to_string(i) + "." + std::to_string(j),
          SwitchRole::Core, 0, 0);

  for (uint32_t p = 0; p < k; p++) {
    std::vector<uint32_t> aggs(half), edges(half);
    for (uint32_t i = 0; i < half; i++)
      aggs[i] = add_switch("agg" + std::to_string(p) + "." + std::to_string(i),
                           SwitchRole::Agg, p, 0);
    for (uint32_t i = 0; i < half; i++)
      edges[i] = add_switch(
          "edge" + std::to_string(p) + "." + std::to_string(i),
          SwitchRole::Edge, p, i);
    for (uint32_t i = 0; i < half; i++)
      for (uint32_t j = 0; j < half; j++)
        add_link({NodeRef::Switch, aggs[i]}, {NodeRef::Switch, edges[j]});
    for (uint32_t i = 0; i < half; i++)
      for (uint32_t j = 0; j < half; j++)
        add_link({NodeRef::Switch, aggs[i]}, {NodeRef::Switch, core[i][j]});
    for (uint32_t e = 0; e < half; e++)
      for (uint32_t h = 0; h < hosts_per_edge; h++) {
        uint32_t hid = static_cast<uint32_t>(t.hosts.size());
        uint32_t link = add_link({NodeRef::Host, hid},
                                 {NodeRef::Switch, edges[e]});
        t.hosts.push_back({hid,
                           "h" + std::to_string(p) + "." + std::to_string(e) +
                               "." + std::to_string(h),
                           edges[e], link});
      }
  }
  t.validate();
  return t;
}

Topology gen_car_topology(uint32_t aggs, uint32_t racks_per_agg,
                          uint32_t hosts_per_rack, uint64_t core_bw,
                          uint64_t edge_bw, SimTime link_latency) {
  if (aggs == 0 || racks_per_agg == 0 || hosts_per_rack == 0)
    throw ConfigError("core/agg/rack topology needs counts >= 1");
  Topology t;
  uint32_t core_ports = aggs;
  uint32_t agg_ports = racks_per_agg + 1;
  uint32_t tor_ports = hosts_per_rack + 1;
  t.switches.push_back({0, "core", core_ports, SwitchRole::Core, 0, 0});
  auto add_link = [&](NodeRef a, NodeRef b, uint64_t bw) {
    uint32_t id = static_cast<uint32_t>(t.links.size());
    t.links.push_back({id, a, b, bw, link_latency});
    return id;
  };
  for (uint32_t a = 0; a < aggs; a++) {
    uint32_t agg_id = static_cast<uint32_t>(t.switches.size());
    t.switches.push_back({agg_id, "agg" + std::to_string(a), agg_ports,
                          SwitchRole::Agg, a, 0});
    add_link({NodeRef::Switch, 0}, {NodeRef::Switch, agg_id}, core_bw);
    for (uint32_t r = 0; r < racks_per_agg; r++) {
      uint32_t tor_id = static_cast<uint32_t>(t.switches.size());
      t.switches.push_back(
          {tor_id, "tor" + std::to_string(a) + "." + std::to_string(r),
           tor_ports, SwitchRole::Tor, a, r});
      add_link({NodeRef::Switch, agg_id}, {NodeRef::Switch, tor_id}, edge_bw);
      for (uint32_t h = 0; h < hosts_per_rack; h++) {
        uint32_t hid = static_cast<uint32_t>(t.hosts.size());
        uint32_t link = add_link({NodeRef::Host, hid},
                                 {NodeRef::Switch, tor_id}, edge_bw);
        t.hosts.push_back({hid,
                           "h" + std::to_string(a) + "." + std::to_string(r) +
                               "." + std::to_string(h),
                           tor_id, link});
      }
    }
  }
  t.validate();
  return t;
}

ForwardingTables compute_routes(const Topology& topo) {
  topo.validate();
  size_t ns = topo.switches.size();
  // Switch adjacency: neighbor -> smallest link id reaching it.
  std::vector<std::map<uint32_t, uint32_t>> adj(ns);
  for (const auto& l : topo.links) {
    if (l.a.kind != NodeRef::Switch || l.b.kind != NodeRef::Switch) continue;
    auto touch = [&](uint32_t from, uint32_t to) {
      auto it = adj[from].find(to);
      if (it == adj[from].end() || l.id < it->second) adj[from][to] = l.id;
    };
    touch(l.a.idx, l.b.idx);
    touch(l.b.idx, l.a.idx);
  }

  ForwardingTables tables(ns);
  for (const auto& h : topo.hosts) {
    // BFS from the destination's attachment switch.
    std::vector<uint32_t> dist(ns, UINT32_MAX);
    std::deque<uint32_t> work{h.switch_id};
    dist[h.switch_id] = 0;
    while (!work.empty()) {
      uint32_t s = work.front();
      work.pop_front();
      for (const auto& [n, link] : adj[s])
        if (dist[n] == UINT32_MAX) {
          dist[n] = dist[s] + 1;
          work.push_back(n);
        }
    }
    for (uint32_t s = 0; s < ns; s++) {
      if (s == h.switch_id) {
        tables[s][h.id] = h.link_id;  // deliver on the host's own port
        continue;
      }
      if (dist[s] == UINT32_MAX)
        throw ConfigError("no route from switch '" + topo.switches[s].name +
                          "' to host '" + h.name + "'");
      uint32_t best_sw = UINT32_MAX, best_link = UINT32_MAX;
      for (const auto& [n, link] : adj[s])
        if (dist[n] + 1 == dist[s] && n < best_sw) {
          best_sw = n;
          best_link = link;
        }
      tables[s][h.id] = best_link;
    }
  }
  return tables;
}

PartitionStrategy PartitionStrategy::parse(const std::string& text) {
  PartitionStrategy st;
  if (text == "s") {
    st.kind = Single;
  } else if (text == "ac") {
    st.kind = AggCore;
  } else if (text == "rs") {
    st.kind = RackSep;
  } else if (text.size() > 2 && text.substr(0, 2) == "cr") {
    st.kind = RackGroup;
    try {
      st.group_size = static_cast<uint32_t>(std::stoul(text.substr(2)));
    } catch (const std::exception&) {
      throw ConfigError("bad partition strategy '" + text + "'");
    }
    if (st.group_size == 0)
      throw ConfigError("crN strategy needs N >= 1, got '" + text + "'");
  } else if (text == "custom") {
    st.kind = Custom;
  } else {
    throw ConfigError("unknown partition strategy '" + text +
                      "' (expected s, ac, crN, rs, custom)");
  }
  return st;
}

std::string PartitionStrategy::name() const {
  switch (kind) {
    case Single:
      return "s";
    case AggCore:
      return "ac";
    case RackGroup:
      return "cr" + std::to_string(group_size);
    case RackSep:
      return "rs";
    case Custom:
      return "custom";
  }
  return "?";
}

Partition partition_topology(const Topology& topo,
                             const PartitionStrategy& strategy) {
  Partition part;
  part.assignment.assign(topo.switches.size(), 0);

  auto require_car_roles = [&] {
    for (const auto& s : topo.switches)
      if (s.role != SwitchRole::Core && s.role != SwitchRole::Agg &&
          s.role != SwitchRole::Tor)
        throw ConfigError("strategy '" + strategy.name() +
                          "' needs a core/agg/rack topology; switch '" +
                          s.name + "' has no such role");
  };

  switch (strategy.kind) {
    case PartitionStrategy::Single:
      part.count = 1;
      break;

    case PartitionStrategy::AggCore: {
      require_car_roles();
      uint32_t naggs = 0;
      for (const auto& s : topo.switches)
        if (s.role == SwitchRole::Agg) naggs = std::max(naggs, s.group + 1);
      if (naggs == 0)
        throw ConfigError("strategy 'ac' needs aggregation switches");
      for (const auto& s : topo.switches)
        part.assignment[s.id] =
            (s.role == SwitchRole::Core) ? naggs : s.group;
      part.count = naggs + 1;
      break;
    }

    case PartitionStrategy::RackGroup: {
      require_car_roles();
      // Racks grouped N at a time within each aggregation block; a final
      // smaller group takes the remainder. All agg + core switches share
      // one extra partition.
      std::map<std::pair<uint32_t, uint32_t>, uint32_t> group_part;
      uint32_t next = 0;
      for (const auto& s : topo.switches) {
        if (s.role != SwitchRole::Tor) continue;
        auto key = std::make_pair(s.group, s.rack / strategy.group_size);
        if (!group_part.count(key)) group_part[key] = next++;
      }
      for (const auto& s : topo.switches) {
        if (s.role == SwitchRole::Tor)
          part.assignment[s.id] =
              group_part[{s.group, s.rack / strategy.group_size}];
        else
          part.assignment[s.id] = next;  // agg + core together
      }
      part.count = next + 1;
      break;
    }

    case PartitionStrategy::RackSep:
      // One process per switch; applies to any topology.
      for (const auto& s : topo.switches) part.assignment[s.id] = s.id;
      part.count = static_cast<uint32_t>(topo.switches.size());
      break;

    case PartitionStrategy::Custom: {
      std::set<uint32_t> used;
      for (const auto& s : topo.switches) {
        auto it = strategy.custom.find(s.name);
        if (it == strategy.custom.end())
          throw ConfigError("custom partition map misses switch '" + s.name +
                            "'");
        part.assignment[s.id] = it->second;
        used.insert(it->second);
      }
      part.count = static_cast<uint32_t>(used.size());
      for (uint32_t i = 0; i < part.count; i++)
        if (!used.count(i))
          throw ConfigError(
              "custom partition indices must be dense starting at 0");
      break;
    }
  }

  for (const auto& l : topo.links) {
    if (l.a.kind != NodeRef::Switch || l.b.kind != NodeRef::Switch) continue;
    if (part.assignment[l.a.idx] != part.assignment[l.b.idx])
      part.cross_links.push_back(l.id);
  }
  return part;
}

}  // namespace splitsim
