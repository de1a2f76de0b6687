#include "splitsim/netsim.hpp"

#include <algorithm>
#include <cstring>
#include <tuple>
#include <ostream>

#include "splitsim/errors.hpp"

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

constexpr uint64_t node_key(NodeRef n) {
  return (static_cast<uint64_t>(n.kind) << 32) | n.idx;
}

}  // namespace

SimTime wire_time(uint32_t bytes, uint64_t bandwidth_bps) {
  unsigned __int128 bits_ps =
      static_cast<unsigned __int128>(bytes) * 8 * 1000000000000ull;
  return SimTime(
      static_cast<uint64_t>((bits_ps + bandwidth_bps - 1) / bandwidth_bps));
}

void TraceAccumulator::add(uint64_t pkt, uint64_t place, uint64_t t_ps) {
  uint64_t h = mix64(pkt ^ mix64(place ^ mix64(t_ps)));
  records++;
  xor_acc ^= h;
  sum_acc += h;
}

void TraceAccumulator::merge(const TraceAccumulator& o) {
  records += o.records;
  xor_acc ^= o.xor_acc;
  sum_acc += o.sum_acc;
}

uint64_t TraceAccumulator::digest() const {
  return mix64(records ^ mix64(xor_acc) ^ mix64(sum_acc));
}

std::vector<uint8_t> CutPacket::encode(const NetPacket& pkt, uint32_t link,
                                       uint64_t seq, SimTime deliver_at) {
  auto frame = pkt.frame.encode();
  std::vector<uint8_t> v(32 + frame.size());
  std::memcpy(v.data(), &link, 4);
  std::memcpy(v.data() + 4, &seq, 8);
  std::memcpy(v.data() + 12, &pkt.pkt_id, 8);
  std::memcpy(v.data() + 20, &pkt.flow, 4);
  std::memcpy(v.data() + 24, &deliver_at.ps, 8);
  std::memcpy(v.data() + 32, frame.data(), frame.size());
  return v;
}

CutPacket CutPacket::decode(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 32 + 14)
    throw ProtocolError("cut-link packet too short (" +
                        std::to_string(bytes.size()) + "B)");
  CutPacket d;
  std::memcpy(&d.link, bytes.data(), 4);
  std::memcpy(&d.seq, bytes.data() + 4, 8);
  std::memcpy(&d.pkt.pkt_id, bytes.data() + 12, 8);
  std::memcpy(&d.pkt.flow, bytes.data() + 20, 4);
  std::memcpy(&d.deliver_at.ps, bytes.data() + 24, 8);
  d.pkt.frame = EthFrame::decode(
      std::vector<uint8_t>(bytes.begin() + 32, bytes.end()));
  return d;
}

// ---------------------------------------------------------------------------

NetSimulator::NetSimulator(NetSimConfig cfg, const Topology& topo,
                           const ForwardingTables& routes,
                           const Partition& part)
    : Simulator(cfg.sim_id),
      cfg_(std::move(cfg)),
      topo_(topo),
      routes_(routes),
      part_(part) {
  for (const auto& [host, spec] : cfg_.apps) {
    if (cfg_.detailed_hosts.count(host)) continue;  // lives elsewhere
    if (part_.of_host(topo_, host) != cfg_.my_partition) continue;
    if (spec.role == AppSpec::Role::Client) {
      ClientState c;
      c.workload = std::make_unique<ClientWorkload>(spec, cfg_.seed, host);
      c.target = UINT32_MAX;
      for (const auto& h : topo_.hosts)
        if (h.name == spec.target) c.target = h.id;
      if (c.target == UINT32_MAX)
        throw ConfigError("client '" + topo_.hosts.at(host).name +
                          "': unknown target '" + spec.target + "'");
      clients_.emplace(host, std::move(c));
    } else {
      servers_.emplace(host, ServerState{});
    }
  }
}

uint64_t NetSimulator::port_key(uint32_t link, NodeRef sender) const {
  const LinkSpec& l = topo_.links[link];
  return (static_cast<uint64_t>(link) << 1) | (l.a == sender ? 0 : 1);
}

NetSimulator::PortState& NetSimulator::port(uint32_t link, NodeRef sender) {
  return ports_[port_key(link, sender)];
}

void NetSimulator::attach_cut_trunk(TrunkAdapter* trunk,
                                    const std::vector<uint32_t>& links) {
  trunk_by_channel_[trunk->config().channel_id] = trunk;
  for (uint32_t link : links) {
    if (link >= topo_.links.size())
      throw ConfigError("trunk '" + trunk->adapter_id() +
                        "' carries unknown link " + std::to_string(link));
    cut_link_ep_[link] = trunk->register_sub(static_cast<uint16_t>(link));
  }
}

void NetSimulator::attach_host_eth(uint32_t host_idx, EthAdapter* eth) {
  eth_by_host_[host_idx] = eth;
  host_by_channel_[eth->config().channel_id] = host_idx;
}

void NetSimulator::verify_wiring() const {
  for (uint32_t link : part_.cross_links) {
    const LinkSpec& l = topo_.links[link];
    uint32_t pa = part_.assignment[l.a.idx];
    uint32_t pb = part_.assignment[l.b.idx];
    if (pa != cfg_.my_partition && pb != cfg_.my_partition) continue;
    if (!cut_link_ep_.count(link))
      throw StartupError("partition " + id() + ": cut link " +
                         std::to_string(link) + " has no trunk sub-channel");
  }
  for (uint32_t h : cfg_.detailed_hosts) {
    if (part_.of_host(topo_, h) != cfg_.my_partition) continue;
    if (!eth_by_host_.count(h))
      throw StartupError("partition " + id() + ": detailed host '" +
                         topo_.hosts[h].name + "' has no ethernet channel");
  }
}

void NetSimulator::prime() {
  for (auto& [host, state] : clients_) {
    SimTime first = state.workload->next_interarrival();
    // Fixed-rate clients start at t=0 so a 1s run at rate R issues exactly R.
    const AppSpec& spec = cfg_.apps.at(host);
    if (spec.arrival == AppSpec::Arrival::FixedRate) first = SimTime::zero();
    uint32_t h = host;
    schedule(first, kClassLocal, topo_.hosts[h].link_id, 0,
             [this, h] { issue_request(h, now()); });
  }
}

void NetSimulator::issue_request(uint32_t host, SimTime t) {
  ClientState& c = clients_.at(host);
  const AppSpec& spec = cfg_.apps.at(host);

  AppMsg msg = c.workload->make_request();
  c.outstanding.emplace(msg.req_id, t);
  stats_.flows[host].requests_sent++;
  send_from_host(host, msg, spec.request_bytes, c.target, t);

  SimTime next = t + c.workload->next_interarrival();
  schedule(next, kClassLocal, topo_.hosts[host].link_id, c.workload->issued(),
           [this, host] { issue_request(host, now()); });
}

void NetSimulator::send_from_host(uint32_t host, const AppMsg& msg,
                                  uint32_t wire_bytes, uint32_t dst_host,
                                  SimTime t) {
  NetPacket pkt;
  pkt.pkt_id = packet_id(msg.client_app, msg.req_id, msg.is_response);
  pkt.flow = msg.client_app;
  pkt.frame.src = mac_of_host(host);
  pkt.frame.dst = mac_of_host(dst_host);
  pkt.frame.payload = encode_app_payload(msg, wire_bytes);
  egress(topo_.hosts[host].link_id, {NodeRef::Host, host}, std::move(pkt), t);
}

void NetSimulator::egress(uint32_t link, NodeRef sender, NetPacket pkt,
                          SimTime t) {
  const LinkSpec& l = topo_.links[link];
  PortState& p = port(link, sender);
  uint32_t wire = pkt.wire_len();
  if (sender.kind == NodeRef::Switch &&
      p.occupancy + wire > cfg_.queue_capacity_bytes) {
    stats_.switch_drops++;
    stats_.flows[pkt.flow].dropped++;
    return;
  }
  p.occupancy += wire;
  SimTime departure = std::max(t, p.busy_until) + wire_time(wire, l.bandwidth_bps);
  p.busy_until = departure;
  uint64_t seq = tx_seq_[port_key(link, sender)]++;
  schedule(departure, kClassLocal, link, seq,
           [this, link, sender, seq, pkt = std::move(pkt), departure]() mutable {
             port(link, sender).occupancy -= pkt.wire_len();
             transmit(link, sender, seq, std::move(pkt), departure);
           });
}

void NetSimulator::transmit(uint32_t link, NodeRef sender, uint64_t seq,
                            NetPacket pkt, SimTime departure) {
  const LinkSpec& l = topo_.links[link];
  NodeRef far = topo_.far_end(l, sender);
  SimTime arrive = departure + l.latency;

  if (far.kind == NodeRef::Host) {
    uint32_t h = far.idx;
    if (cfg_.detailed_hosts.count(h)) {
      eth_by_host_.at(h)->send(departure, pkt.frame);
      return;
    }
    schedule_arrival(far, link, seq, std::move(pkt), arrive);
    return;
  }

  uint32_t peer_part = part_.assignment[far.idx];
  if (peer_part == cfg_.my_partition) {
    schedule_arrival(far, link, seq, std::move(pkt), arrive);
  } else {
    cut_link_ep_.at(link)->send(departure,
                                CutPacket::encode(pkt, link, seq, arrive));
  }
}

void NetSimulator::schedule_arrival(NodeRef node, uint32_t link, uint64_t seq,
                                    NetPacket pkt, SimTime at) {
  schedule(at, kClassLocal, link, seq,
           [this, node, link, seq, pkt = std::move(pkt)]() mutable {
             deposit(node, link, seq, std::move(pkt));
           });
}

void NetSimulator::deposit(NodeRef node, uint32_t link, uint64_t seq,
                           NetPacket pkt) {
  pending_[node_key(node)].push_back(Pending{link, seq, std::move(pkt)});
}

void NetSimulator::on_channel_message(InEndpoint& ep, ChannelMessage msg) {
  auto trunk_it = trunk_by_channel_.find(ep.config().channel_id);
  if (trunk_it != trunk_by_channel_.end()) {
    TrunkFrame tf = trunk_it->second->demux(msg);
    auto cut = CutPacket::decode(tf.inner);
    const LinkSpec& l = topo_.links.at(cut.link);
    NodeRef target = part_.assignment[l.a.idx] == cfg_.my_partition ? l.a
                                                                    : l.b;
    if (cut.deliver_at < now())
      throw ProtocolError("partition " + id() + ": cut-link packet for " +
                          format_simtime(cut.deliver_at) +
                          " arrived past its time at " +
                          format_simtime(now()));
    if (cut.deliver_at == now())
      deposit(target, cut.link, cut.seq, std::move(cut.pkt));
    else
      schedule_arrival(target, cut.link, cut.seq, std::move(cut.pkt),
                       cut.deliver_at);
    return;
  }
  auto host_it = host_by_channel_.find(ep.config().channel_id);
  if (host_it != host_by_channel_.end()) {
    // Frame from a detailed host's NIC: enters the network at its switch.
    uint32_t h = host_it->second;
    const HostSpec& host = topo_.hosts[h];
    EthFrame frame = EthFrame::decode(msg.payload);
    AppMsg app = decode_app_payload(frame.payload);
    NetPacket pkt;
    pkt.pkt_id = packet_id(app.client_app, app.req_id, app.is_response);
    pkt.flow = app.client_app;
    pkt.frame = std::move(frame);
    deposit({NodeRef::Switch, host.switch_id}, host.link_id, msg.seq,
            std::move(pkt));
    return;
  }
  throw ProtocolError("partition " + id() + ": message on unknown channel '" +
                      ep.config().channel_id + "'");
}

void NetSimulator::on_timestep_complete(SimTime t) {
  if (pending_.empty()) return;
  auto batch = std::move(pending_);
  pending_.clear();
  for (auto& [key, items] : batch) {
    std::sort(items.begin(), items.end(),
              [](const Pending& x, const Pending& y) {
                return std::tie(x.link, x.seq) < std::tie(y.link, y.seq);
              });
    NodeRef node{static_cast<NodeRef::Kind>(key >> 32),
                 static_cast<uint32_t>(key)};
    if (node.kind == NodeRef::Switch)
      commit_switch(node.idx, items, t);
    else
      commit_host(node.idx, items, t);
  }
}

void NetSimulator::commit_switch(uint32_t sw, std::vector<Pending>& items,
                                 SimTime t) {
  for (auto& it : items) {
    stats_.trace.add(it.pkt.pkt_id, sw, t.ps);
    if (cfg_.hop_observer) cfg_.hop_observer(it.pkt.pkt_id, sw, t);
    auto dst = host_of_mac(it.pkt.frame.dst);
    if (!dst || !routes_[sw].count(*dst)) {
      stats_.unknown_dst_drops++;
      stats_.flows[it.pkt.flow].dropped++;
      continue;
    }
    uint32_t out_link = routes_[sw].at(*dst);
    egress(out_link, {NodeRef::Switch, sw}, std::move(it.pkt), t);
  }
}

void NetSimulator::commit_host(uint32_t host, std::vector<Pending>& items,
                               SimTime t) {
  for (auto& it : items) {
    AppMsg msg = decode_app_payload(it.pkt.frame.payload);
    if (msg.is_response) {
      auto cit = clients_.find(host);
      if (cit == clients_.end()) {
        stats_.unknown_dst_drops++;
        continue;
      }
      auto out = cit->second.outstanding.find(msg.req_id);
      if (out == cit->second.outstanding.end()) {
        stats_.unknown_dst_drops++;
        continue;
      }
      FlowCounters& f = stats_.flows[host];
      f.responses_delivered++;
      f.bytes_delivered += it.pkt.wire_len();
      f.latency_ns.push_back((t - out->second).ps / 1000);
      cit->second.outstanding.erase(out);
    } else {
      auto sit = servers_.find(host);
      if (sit == servers_.end()) {
        stats_.unknown_dst_drops++;
        continue;
      }
      ServerState& srv = sit->second;
      FlowCounters& f = stats_.flows[msg.client_app];
      f.requests_delivered++;
      const AppSpec& spec = cfg_.apps.at(host);
      SimTime done = std::max(t, srv.busy_until) + spec.service_time;
      srv.busy_until = done;

      AppMsg resp;
      resp.is_response = true;
      resp.is_write = msg.is_write;
      resp.client_app = msg.client_app;
      resp.req_id = msg.req_id;
      resp.key = msg.key;
      resp.response_bytes = msg.response_bytes;
      uint32_t wire = msg.response_bytes;
      uint32_t back_to = msg.client_app;
      if (done == t) {
        stats_.flows[msg.client_app].responses_sent++;
        send_from_host(host, resp, wire, back_to, t);
      } else {
        schedule(done, kClassLocal, topo_.hosts[host].link_id,
                 ++srv.egress_events, [this, host, resp, wire, back_to] {
                   stats_.flows[resp.client_app].responses_sent++;
                   send_from_host(host, resp, wire, back_to, now());
                 });
      }
    }
  }
}

void NetSimulator::test_inject(uint32_t sw, uint32_t in_link, uint64_t seq,
                               NetPacket pkt, SimTime at) {
  schedule_arrival({NodeRef::Switch, sw}, in_link, seq, std::move(pkt), at);
}

void NetSimulator::write_stats(std::ostream& os) const {
  os << "NETSTATS v1\n";
  os << "partition " << id() << "\n";
  os << "trace_records " << stats_.trace.records << "\n";
  os << "trace_xor " << stats_.trace.xor_acc << "\n";
  os << "trace_sum " << stats_.trace.sum_acc << "\n";
  os << "switch_drops " << stats_.switch_drops << "\n";
  os << "unknown_dst_drops " << stats_.unknown_dst_drops << "\n";
  os << "events " << events_processed() << "\n";
  for (const auto& [flow, f] : stats_.flows) {
    LatencyStats ls = summarize_latency(f.latency_ns);
    os << "flow " << topo_.hosts[flow].name << " sent " << f.requests_sent
       << " received " << f.responses_delivered << " delivered_req "
       << f.requests_delivered << " resp_sent " << f.responses_sent
       << " dropped " << f.dropped << " bytes " << f.bytes_delivered
       << " lat_mean_ns " << ls.mean_ns << " lat_p50_ns " << ls.p50_ns
       << " lat_p99_ns " << ls.p99_ns << "\n";
  }
  for (const auto& [aid, c] : adapters())
    os << "adapter " << aid << " syncs_tx " << c->syncs_tx << " syncs_rx "
       << c->syncs_rx << " data_tx " << c->data_tx << " data_rx "
       << c->data_rx << "\n";
  os << "END\n";
}

}  // namespace splitsim
