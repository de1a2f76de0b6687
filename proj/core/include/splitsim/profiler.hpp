#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "splitsim/counters.hpp"
#include "splitsim/simtime.hpp"

namespace splitsim {

// One sampler line: absolute counter totals at one instant.
struct ProfileSample {
  uint64_t wall_cycles = 0;
  SimTime sim_time;
  std::vector<std::pair<std::string, AdapterCounters>> adapters;
};

struct SimulatorLog {
  std::string sim_id;
  uint64_t cycles_per_second = kCyclesPerSecond;
  std::vector<ProfileSample> samples;
};

// Parses one simulator's sample log:
//   PROFHDR <cycles_per_second>
//   PROF <sim-id> <wall_cycles> <sim_time_ps> [<adapter-id>:<wait>:<tx>:<rx>]...
SimulatorLog parse_profile_log(std::istream& in);
SimulatorLog parse_profile_log_file(const std::string& path);

// adapter id -> destination simulator id, per source simulator.
using WtpWiring = std::map<std::string, std::map<std::string, std::string>>;

struct WtpNode {
  std::string sim_id;
  double wait_fraction = 0;  // sum of outgoing-wait fractions
  std::string color;         // "#rrggbb", red = least waiting
};

struct WtpEdge {
  std::string src;
  std::string dst;
  double weight = 0;  // fraction of src's cycles spent waiting on dst
};

// Who waits for who: a node per simulator instance, a directed edge per
// channel direction, weighted by the source's waiting share.
struct WtpGraph {
  std::vector<WtpNode> nodes;  // sorted by sim_id
  std::vector<WtpEdge> edges;  // sorted by (src, dst)
};

struct ProfileReport {
  double sim_speed = 0;  // simulated seconds per wall second
  std::vector<std::pair<std::string, double>> efficiency;  // per sim, sorted
  WtpGraph graph;
  std::vector<std::string> warnings;
};

// Simulated-time delta divided by wall-clock delta over the kept window
// (drops `warmup` leading and `cooldown` trailing samples). Throws
// ConfigError naming the log if it has fewer than warmup+cooldown+2 samples.
double compute_sim_speed(const SimulatorLog& log, int warmup, int cooldown);

// 1 - (Δrx + Δtx + Δwait) / Δwall over the kept window, clamped to [0, 1].
double compute_efficiency(const SimulatorLog& log, int warmup, int cooldown);

// Builds the wait-time-profile graph. Every adapter id in the logs must
// appear in the wiring. Node colors interpolate green (most waiting) to red
// (least waiting) over min-max-normalized node totals.
WtpGraph build_wtpg(const std::vector<SimulatorLog>& logs,
                    const WtpWiring& wiring, int warmup, int cooldown);

// Full post-processing pass; pure function of its inputs.
ProfileReport build_report(const std::vector<SimulatorLog>& logs,
                           const WtpWiring& wiring, int warmup = 1,
                           int cooldown = 1);

// Deterministic DOT rendering: stable node order, hex fill colors, edge
// labels as percentages with one decimal.
std::string emit_dot(const WtpGraph& graph);

}  // namespace splitsim
