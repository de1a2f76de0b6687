#include <sstream>

#include "doctest.h"
#include "splitsim/errors.hpp"
#include "splitsim/profiler.hpp"

using namespace splitsim;

namespace {

// Synthesizes a log with `n` samples where each inter-sample step advances
// wall time by `wall_step` cycles and simulated time by `sim_step`, and each
// adapter counter by the given per-step deltas.
SimulatorLog synth_log(const std::string& id, int n, uint64_t wall_step,
                       SimTime sim_step, uint64_t wait_step = 0,
                       uint64_t tx_step = 0, uint64_t rx_step = 0,
                       const std::string& adapter = "ch") {
  SimulatorLog log;
  log.sim_id = id;
  log.cycles_per_second = kCyclesPerSecond;
  for (int i = 0; i < n; i++) {
    ProfileSample s;
    s.wall_cycles = 1000 + wall_step * i;
    s.sim_time = SimTime(sim_step.ps * i);
    AdapterCounters c;
    c.cycles_wait_sync = wait_step * i;
    c.cycles_tx = tx_step * i;
    c.cycles_rx = rx_step * i;
    s.adapters.emplace_back(adapter, c);
    log.samples.push_back(s);
  }
  return log;
}

}  // namespace

TEST_CASE("sim speed: 20 simulated seconds in 175 wall minutes") {
  // 4 samples, warmup/cooldown of 1 keeps the middle two. One step spans
  // 20s of simulated time and 175min of wall time.
  uint64_t wall_step = 175ull * 60 * kCyclesPerSecond;
  SimulatorLog log = synth_log("net.0", 4, wall_step, SimTime::from_sec(20));
  double speed = compute_sim_speed(log, 1, 1);
  CHECK(speed == doctest::Approx(1.905e-3).epsilon(1e-6 / 1.905e-3));
  CHECK(std::abs(speed - 20.0 / (175.0 * 60.0)) < 1e-12);
}

TEST_CASE("sim speed of a realtime simulator is 1") {
  SimulatorLog log =
      synth_log("s", 4, 10 * kCyclesPerSecond, SimTime::from_sec(10));
  CHECK(compute_sim_speed(log, 1, 1) == doctest::Approx(1.0));
}

TEST_CASE("sim speed needs warmup + cooldown + 2 samples") {
  SimulatorLog log = synth_log("short", 3, 1000, SimTime::from_sec(1));
  try {
    compute_sim_speed(log, 1, 1);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("short") != std::string::npos);
  }
}

TEST_CASE("efficiency is one minus the adapter share") {
  // per-step deltas: rx 30, tx 10, wait 20 of 100 wall cycles -> 0.4
  SimulatorLog log =
      synth_log("s", 4, 100, SimTime::from_us(1), 20, 10, 30);
  CHECK(compute_efficiency(log, 1, 1) == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("efficiency clamps: all-idle near 0, adapter-free exactly 1") {
  SimulatorLog idle = synth_log("s", 4, 100, SimTime::from_us(1), 100, 0, 0);
  CHECK(compute_efficiency(idle, 1, 1) == doctest::Approx(0.0));

  SimulatorLog free_log;
  free_log.sim_id = "solo";
  for (int i = 0; i < 4; i++) {
    ProfileSample s;
    s.wall_cycles = 1000 + 100 * i;
    s.sim_time = SimTime::from_us(i);
    free_log.samples.push_back(s);
  }
  CHECK(compute_efficiency(free_log, 1, 1) == doctest::Approx(1.0));
}

TEST_CASE("report warns when simulators disagree on sim speed") {
  auto a = synth_log("a", 4, 100, SimTime::from_us(1));
  auto b = synth_log("b", 4, 100, SimTime(1030000));  // ~3% faster
  WtpWiring wiring;
  wiring["a"]["ch"] = "b";
  wiring["b"]["ch"] = "a";
  auto report = build_report({a, b}, wiring, 1, 1);
  REQUIRE(report.warnings.size() == 1);
  CHECK(report.warnings[0].find("disagree") != std::string::npos);
}

TEST_CASE("wtpg edge weight is the source's waiting share") {
  // simulator waiting 50 of 200 cycles on one peer -> edge weight 0.25
  auto a = synth_log("a", 4, 200, SimTime::from_us(1), 50);
  auto b = synth_log("b", 4, 200, SimTime::from_us(1), 10);
  WtpWiring wiring;
  wiring["a"]["ch"] = "b";
  wiring["b"]["ch"] = "a";
  auto g = build_wtpg({a, b}, wiring, 1, 1);
  REQUIRE(g.edges.size() == 2);
  CHECK(g.edges[0].src == "a");
  CHECK(g.edges[0].weight == doctest::Approx(0.25));
  CHECK(g.edges[1].src == "b");
  CHECK(g.edges[1].weight == doctest::Approx(0.05));
}

TEST_CASE("node totals sum outgoing edges; zero-wait node is reddest") {
  auto a = synth_log("a", 4, 100, SimTime::from_us(1), 40);
  auto busy = synth_log("busy", 4, 100, SimTime::from_us(1), 0);
  WtpWiring wiring;
  wiring["a"]["ch"] = "busy";
  wiring["busy"]["ch"] = "a";
  auto g = build_wtpg({a, busy}, wiring, 1, 1);
  REQUIRE(g.nodes.size() == 2);
  CHECK(g.nodes[0].sim_id == "a");
  CHECK(g.nodes[0].wait_fraction == doctest::Approx(0.4));
  CHECK(g.nodes[0].color == "#00ff00");  // most waiting -> green
  CHECK(g.nodes[1].sim_id == "busy");
  CHECK(g.nodes[1].wait_fraction == doctest::Approx(0.0));
  CHECK(g.nodes[1].color == "#ff0000");  // least waiting -> red
}

TEST_CASE("unknown adapter id fails wtpg construction") {
  auto a = synth_log("a", 4, 100, SimTime::from_us(1), 10);
  WtpWiring wiring;  // empty
  CHECK_THROWS_AS(build_wtpg({a}, wiring, 1, 1), ConfigError);
}

TEST_CASE("dot output is deterministic and structurally sound") {
  auto a = synth_log("a", 4, 200, SimTime::from_us(1), 50);
  auto b = synth_log("b", 4, 200, SimTime::from_us(1), 10);
  WtpWiring wiring;
  wiring["a"]["ch"] = "b";
  wiring["b"]["ch"] = "a";
  auto g = build_wtpg({a, b}, wiring, 1, 1);
  std::string dot1 = emit_dot(g);
  std::string dot2 = emit_dot(build_wtpg({b, a}, wiring, 1, 1));
  CHECK(dot1 == dot2);  // byte-identical regardless of log order
  CHECK(dot1.find("digraph wtpg {") == 0);
  CHECK(dot1.find("\"a\" -> \"b\" [label=\"25.0%\"]") != std::string::npos);
  CHECK(dot1.find("\"b\" -> \"a\" [label=\"5.0%\"]") != std::string::npos);
  // two node statements, two edge statements
  CHECK(std::count(dot1.begin(), dot1.end(), '>') == 2);
}

TEST_CASE("empty graph renders as a valid empty digraph") {
  WtpGraph g;
  CHECK(emit_dot(g) == "digraph wtpg {\n}\n");
}

TEST_CASE("profile log round-trips through the line format") {
  std::stringstream ss;
  ss << "PROFHDR 1000000000\n";
  ss << "PROF net.p0 1111 500000 eth.h0:10:20:30 trunk.p0-p1:1:2:3\n";
  ss << "PROF net.p0 2222 900000 eth.h0:15:25:35 trunk.p0-p1:2:3:4\n";
  auto log = parse_profile_log(ss);
  CHECK(log.sim_id == "net.p0");
  CHECK(log.cycles_per_second == 1000000000);
  REQUIRE(log.samples.size() == 2);
  CHECK(log.samples[0].wall_cycles == 1111);
  CHECK(log.samples[1].sim_time == SimTime(900000));
  REQUIRE(log.samples[1].adapters.size() == 2);
  CHECK(log.samples[1].adapters[0].first == "eth.h0");
  CHECK(log.samples[1].adapters[0].second.cycles_wait_sync == 15);
  CHECK(log.samples[1].adapters[1].second.cycles_rx == 4);
}

TEST_CASE("parser rejects non-monotone samples and mixed simulators") {
  std::stringstream ss;
  ss << "PROF a 200 100\n";
  ss << "PROF a 100 200\n";  // wall went backwards
  CHECK_THROWS_AS(parse_profile_log(ss), ConfigError);

  std::stringstream ss2;
  ss2 << "PROF a 100 100\n";
  ss2 << "PROF b 200 200\n";
  CHECK_THROWS_AS(parse_profile_log(ss2), ConfigError);
}

TEST_CASE("post-processing is pure: same logs give identical reports") {
  auto a = synth_log("a", 6, 300, SimTime::from_us(2), 12, 5, 9);
  auto b = synth_log("b", 6, 300, SimTime::from_us(2), 80, 1, 2);
  WtpWiring wiring;
  wiring["a"]["ch"] = "b";
  wiring["b"]["ch"] = "a";
  auto r1 = build_report({a, b}, wiring, 1, 1);
  auto r2 = build_report({a, b}, wiring, 1, 1);
  CHECK(r1.sim_speed == r2.sim_speed);
  CHECK(r1.efficiency == r2.efficiency);
  CHECK(emit_dot(r1.graph) == emit_dot(r2.graph));
}
