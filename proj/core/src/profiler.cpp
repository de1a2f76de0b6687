#include "splitsim/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "splitsim/errors.hpp"

namespace splitsim {

namespace {

struct Window {
  const ProfileSample& early;
  const ProfileSample& late;
};

Window kept_window(const SimulatorLog& log, int warmup, int cooldown) {
  size_t need = static_cast<size_t>(warmup) + cooldown + 2;
  if (log.samples.size() < need)
    throw ConfigError("profile log for '" + log.sim_id + "' has only " +
                      std::to_string(log.samples.size()) + " samples, need " +
                      std::to_string(need) + " (warmup " +
                      std::to_string(warmup) + " + cooldown " +
                      std::to_string(cooldown) + " + 2)");
  return {log.samples[warmup], log.samples[log.samples.size() - 1 - cooldown]};
}

uint64_t adapter_delta(const ProfileSample& early, const ProfileSample& late,
                       const std::string& adapter,
                       uint64_t AdapterCounters::*field) {
  uint64_t e = 0, l = 0;
  for (const auto& [id, c] : early.adapters)
    if (id == adapter) e = c.*field;
  for (const auto& [id, c] : late.adapters)
    if (id == adapter) l = c.*field;
  return l - e;
}

std::string color_hex(double normalized) {
  // 0 -> red (least waiting), 1 -> green (most waiting)
  int r = static_cast<int>(std::lround(255.0 * (1.0 - normalized)));
  int g = static_cast<int>(std::lround(255.0 * normalized));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x00", r, g);
  return buf;
}

}  // namespace

SimulatorLog parse_profile_log(std::istream& in) {
  SimulatorLog log;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "PROFHDR") {
      if (!(ls >> log.cycles_per_second))
        throw ConfigError("bad PROFHDR line " + std::to_string(lineno));
      continue;
    }
    if (tag != "PROF")
      throw ConfigError("unexpected profile line " + std::to_string(lineno) +
                        ": '" + line + "'");
    ProfileSample s;
    uint64_t sim_ps = 0;
    std::string sim_id;
    if (!(ls >> sim_id >> s.wall_cycles >> sim_ps))
      throw ConfigError("bad PROF line " + std::to_string(lineno));
    s.sim_time = SimTime(sim_ps);
    if (log.sim_id.empty())
      log.sim_id = sim_id;
    else if (log.sim_id != sim_id)
      throw ConfigError("profile log mixes simulators '" + log.sim_id +
                        "' and '" + sim_id + "'");
    std::string entry;
    while (ls >> entry) {
      AdapterCounters c;
      std::string aid;
      // <adapter-id>:<wait>:<tx>:<rx>, adapter ids may contain dots
      size_t p3 = entry.rfind(':');
      size_t p2 = p3 == std::string::npos ? p3 : entry.rfind(':', p3 - 1);
      size_t p1 = p2 == std::string::npos || p2 == 0
                      ? std::string::npos
                      : entry.rfind(':', p2 - 1);
      if (p1 == std::string::npos)
        throw ConfigError("bad adapter entry '" + entry + "' on line " +
                          std::to_string(lineno));
      aid = entry.substr(0, p1);
      c.cycles_wait_sync = std::stoull(entry.substr(p1 + 1, p2 - p1 - 1));
      c.cycles_tx = std::stoull(entry.substr(p2 + 1, p3 - p2 - 1));
      c.cycles_rx = std::stoull(entry.substr(p3 + 1));
      s.adapters.emplace_back(aid, c);
    }
    if (!log.samples.empty()) {
      if (s.wall_cycles < log.samples.back().wall_cycles ||
          s.sim_time < log.samples.back().sim_time)
        throw ConfigError("non-monotone sample at line " +
                          std::to_string(lineno) + " in log for '" +
                          log.sim_id + "'");
    }
    log.samples.push_back(std::move(s));
  }
  return log;
}

SimulatorLog parse_profile_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profile log '" + path + "'");
  auto log = parse_profile_log(in);
  if (log.sim_id.empty())
    throw ConfigError("profile log '" + path + "' holds no samples");
  return log;
}

double compute_sim_speed(const SimulatorLog& log, int warmup, int cooldown) {
  auto w = kept_window(log, warmup, cooldown);
  uint64_t dwall = w.late.wall_cycles - w.early.wall_cycles;
  if (dwall == 0)
    throw ConfigError("zero wall-cycle delta in log for '" + log.sim_id + "'");
  double wall_seconds =
      static_cast<double>(dwall) / static_cast<double>(log.cycles_per_second);
  return (w.late.sim_time - w.early.sim_time).to_sec() / wall_seconds;
}

double compute_efficiency(const SimulatorLog& log, int warmup, int cooldown) {
  auto w = kept_window(log, warmup, cooldown);
  uint64_t dwall = w.late.wall_cycles - w.early.wall_cycles;
  if (dwall == 0)
    throw ConfigError("zero wall-cycle delta in log for '" + log.sim_id + "'");
  uint64_t busy = 0;
  for (const auto& [aid, c] : w.late.adapters) {
    busy += adapter_delta(w.early, w.late, aid, &AdapterCounters::cycles_rx);
    busy += adapter_delta(w.early, w.late, aid, &AdapterCounters::cycles_tx);
    busy += adapter_delta(w.early, w.late, aid,
                          &AdapterCounters::cycles_wait_sync);
  }
  double eff = 1.0 - static_cast<double>(busy) / static_cast<double>(dwall);
  return std::clamp(eff, 0.0, 1.0);
}

WtpGraph build_wtpg(const std::vector<SimulatorLog>& logs,
                    const WtpWiring& wiring, int warmup, int cooldown) {
  WtpGraph g;
  std::map<std::string, double> node_totals;
  for (const auto& log : logs) node_totals[log.sim_id] = 0.0;

  for (const auto& log : logs) {
    auto w = kept_window(log, warmup, cooldown);
    uint64_t dwall = w.late.wall_cycles - w.early.wall_cycles;
    if (dwall == 0)
      throw ConfigError("zero wall-cycle delta in log for '" + log.sim_id +
                        "'");
    auto sim_wiring = wiring.find(log.sim_id);
    for (const auto& [aid, c] : w.late.adapters) {
      if (sim_wiring == wiring.end() || !sim_wiring->second.count(aid))
        throw ConfigError("adapter '" + aid + "' of simulator '" +
                          log.sim_id + "' missing from channel wiring");
      const std::string& dst = sim_wiring->second.at(aid);
      uint64_t dwait = adapter_delta(w.early, w.late, aid,
                                     &AdapterCounters::cycles_wait_sync);
      double weight = static_cast<double>(dwait) / static_cast<double>(dwall);
      g.edges.push_back({log.sim_id, dst, weight});
      node_totals[log.sim_id] += weight;
      if (!node_totals.count(dst)) node_totals[dst] = 0.0;
    }
  }

  double lo = 0, hi = 0;
  bool first = true;
  for (const auto& [id, total] : node_totals) {
    if (first) {
      lo = hi = total;
      first = false;
    } else {
      lo = std::min(lo, total);
      hi = std::max(hi, total);
    }
  }
  for (const auto& [id, total] : node_totals) {
    double norm = (hi > lo) ? (total - lo) / (hi - lo) : 0.5;
    g.nodes.push_back({id, total, color_hex(norm)});
  }
  std::sort(g.nodes.begin(), g.nodes.end(),
            [](const WtpNode& a, const WtpNode& b) {
              return a.sim_id < b.sim_id;
            });
  std::sort(g.edges.begin(), g.edges.end(),
            [](const WtpEdge& a, const WtpEdge& b) {
              return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
            });
  return g;
}

ProfileReport build_report(const std::vector<SimulatorLog>& logs,
                           const WtpWiring& wiring, int warmup, int cooldown) {
  ProfileReport r;
  if (logs.empty()) throw ConfigError("no profile logs to post-process");

  double speed_sum = 0, speed_lo = 0, speed_hi = 0;
  bool first = true;
  for (const auto& log : logs) {
    double s = compute_sim_speed(log, warmup, cooldown);
    speed_sum += s;
    if (first) {
      speed_lo = speed_hi = s;
      first = false;
    } else {
      speed_lo = std::min(speed_lo, s);
      speed_hi = std::max(speed_hi, s);
    }
    r.efficiency.emplace_back(log.sim_id,
                              compute_efficiency(log, warmup, cooldown));
  }
  r.sim_speed = speed_sum / static_cast<double>(logs.size());
  if (speed_lo > 0 && (speed_hi - speed_lo) / speed_lo > 0.01) {
    std::ostringstream os;
    os << "per-simulator sim speeds disagree by more than 1% (" << speed_lo
       << " .. " << speed_hi
       << "); synchronized simulators should progress together";
    r.warnings.push_back(os.str());
  }
  std::sort(r.efficiency.begin(), r.efficiency.end());
  r.graph = build_wtpg(logs, wiring, warmup, cooldown);
  return r;
}

std::string emit_dot(const WtpGraph& graph) {
  std::ostringstream os;
  os << "digraph wtpg {\n";
  if (!graph.nodes.empty()) os << "  node [style=filled];\n";
  for (const auto& n : graph.nodes) {
    char pct[32];
    std::snprintf(pct, sizeof(pct), "%.1f%%", n.wait_fraction * 100.0);
    os << "  \"" << n.sim_id << "\" [fillcolor=\"" << n.color
       << "\", label=\"" << n.sim_id << "\\nwait " << pct << "\"];\n";
  }
  for (const auto& e : graph.edges) {
    char pct[32];
    std::snprintf(pct, sizeof(pct), "%.1f%%", e.weight * 100.0);
    os << "  \"" << e.src << "\" -> \"" << e.dst << "\" [label=\"" << pct
       << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace splitsim
