#include <unistd.h>

#include <atomic>
#include <thread>
#include <vector>

#include "doctest.h"
#include "splitsim/channel.hpp"
#include "splitsim/errors.hpp"
#include "splitsim/event_loop.hpp"

using namespace splitsim;

namespace {

ChannelConfig cfg(const std::string& id, SimTime latency, SimTime sync) {
  ChannelConfig c;
  c.channel_id = id;
  c.latency = latency;
  c.sync_interval = sync;
  c.protocol = Protocol::Ethernet;
  return c;
}

std::vector<uint8_t> bytes(std::initializer_list<uint8_t> v) { return v; }

}  // namespace

TEST_CASE("create_channel initializes the horizon to one latency") {
  auto pair = create_channel(cfg("c", SimTime::from_ns(500), SimTime::from_ns(500)));
  CHECK(pair.in->input_horizon() == SimTime::from_ns(500));
}

TEST_CASE("create_channel rejects invalid configs") {
  CHECK_THROWS_AS(create_channel(cfg("c", SimTime::zero(), SimTime::from_ns(500))),
                  ConfigError);
  CHECK_THROWS_AS(
      create_channel(cfg("c", SimTime::from_ns(500), SimTime::from_ns(600))),
      ConfigError);
  CHECK_THROWS_AS(
      create_channel(cfg("c", SimTime::from_ns(500), SimTime::zero())),
      ConfigError);
}

TEST_CASE("send_data delivers at send_time + latency, not earlier") {
  auto pair = create_channel(cfg("c", SimTime::from_ns(500), SimTime::from_ns(500)));
  pair.out->send_data(SimTime::from_ns(100), bytes({1, 2, 3}));
  pair.in->poll();
  REQUIRE(pair.in->has_data());
  CHECK(pair.in->front_delivery() == SimTime::from_ns(600));
  // the data message moved the horizon as a sync would
  CHECK(pair.in->input_horizon() == SimTime::from_ns(600));
}

TEST_CASE("send_data timestamp regression is a fatal protocol error") {
  auto pair = create_channel(cfg("c", SimTime::from_ns(500), SimTime::from_ns(500)));
  pair.out->send_data(SimTime::from_ns(100), bytes({1}));
  CHECK_THROWS_AS(pair.out->send_data(SimTime::from_ns(90), bytes({2})),
                  ProtocolError);
}

TEST_CASE("receiver sees the message once its clock reaches delivery time") {
  auto pair = create_channel(cfg("c", SimTime::from_ns(500), SimTime::from_ns(500)));
  pair.out->send_data(SimTime::zero(), bytes({42}));
  pair.in->poll();
  REQUIRE(pair.in->has_data());
  CHECK(pair.in->front_delivery() == SimTime::from_ns(500));
  auto msg = pair.in->pop();
  CHECK(msg.payload == bytes({42}));
  CHECK(msg.send_time == SimTime::zero());
}

TEST_CASE("maybe_send_sync follows the cadence") {
  auto pair = create_channel(cfg("c", SimTime::from_us(1), SimTime::from_ns(500)));

  SUBCASE("interval elapsed -> sync emitted") {
    CHECK(pair.out->maybe_send_sync(SimTime::from_ns(500)));
    pair.in->poll();
    CHECK(pair.in->input_horizon() == SimTime::from_ns(1500));
  }
  SUBCASE("interval not elapsed -> nothing") {
    CHECK_FALSE(pair.out->maybe_send_sync(SimTime::from_ns(499)));
  }
  SUBCASE("a data message counts as the sync") {
    pair.out->send_data(SimTime::from_ns(600), bytes({1}));
    CHECK_FALSE(pair.out->maybe_send_sync(SimTime::from_ns(600)));
    CHECK(pair.out->maybe_send_sync(SimTime::from_ns(1100)));
  }
}

TEST_CASE("input_horizon is the max promise over syncs and data") {
  auto pair = create_channel(cfg("c", SimTime::from_ns(500), SimTime::from_ns(500)));
  CHECK(pair.in->input_horizon() == SimTime::from_ns(500));

  pair.out->flush_sync(SimTime::from_us(1));
  pair.in->poll();
  CHECK(pair.in->input_horizon() == SimTime(1500000));  // 1.5us

  pair.out->send_data(SimTime::from_us(2), bytes({1}));
  pair.out->flush_sync(SimTime::from_us(3));
  pair.in->poll();
  CHECK(pair.in->input_horizon() == SimTime(3500000));  // 3.5us
}

TEST_CASE("horizon is monotone and FIFO order holds per direction") {
  auto pair = create_channel(cfg("c", SimTime::from_ns(500), SimTime::from_ns(100)));
  SimTime prev_horizon = pair.in->input_horizon();
  SimTime prev_send;
  uint64_t seen = 0;
  for (int i = 0; i < 50; i++) {
    SimTime t = SimTime::from_ns(100 * (i + 1));
    if (i % 3 == 0)
      pair.out->flush_sync(t);
    else
      pair.out->send_data(t, bytes({static_cast<uint8_t>(i)}));
    pair.in->poll();
    CHECK(pair.in->input_horizon() >= prev_horizon);
    prev_horizon = pair.in->input_horizon();
    while (pair.in->has_data()) {
      auto m = pair.in->pop();
      CHECK(m.send_time >= prev_send);
      CHECK(m.seq == seen);
      prev_send = m.send_time;
      seen++;
    }
  }
}

TEST_CASE("wait_until returns immediately when horizons suffice") {
  auto pair = create_channel(cfg("c", SimTime::from_ns(500), SimTime::from_ns(500)));
  AdapterCounters counters;
  pair.in->attach_counters(&counters);
  wait_until({pair.in.get()}, SimTime::from_ns(500));
  CHECK(counters.cycles_wait_sync < 1000000);  // well under 1ms of "blocking"
}

TEST_CASE("wait_until blocks until the peer's sync arrives and charges wait") {
  auto pair = create_channel(cfg("c", SimTime::from_ns(500), SimTime::from_ns(500)));
  AdapterCounters counters;
  pair.in->attach_counters(&counters);
  OutEndpoint* out = pair.out.get();

  std::thread peer([out] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    out->flush_sync(SimTime::from_us(10));
  });
  wait_until({pair.in.get()}, SimTime::from_us(10));
  peer.join();
  CHECK(pair.in->input_horizon() >= SimTime::from_us(10));
  CHECK(counters.cycles_wait_sync > 1000000);  // at least ~1ms of waiting
}

TEST_CASE("wait_until reports a closed peer") {
  auto pair = create_channel(cfg("c", SimTime::from_ns(500), SimTime::from_ns(500)));
  pair.out->close();
  CHECK_THROWS_AS(wait_until({pair.in.get()}, SimTime::from_us(10), 1000),
                  ChannelClosedError);
}

// ---------------------------------------------------------------------------
// Event loop

namespace {

struct Recorder : Simulator {
  using Simulator::Simulator;
  std::vector<std::pair<SimTime, std::string>> log;

  void on_channel_message(InEndpoint& ep, ChannelMessage msg) override {
    log.emplace_back(now(), ep.config().channel_id + ":" +
                                std::to_string(msg.payload.at(0)));
  }
};

void run_pair(Simulator& a, Simulator& b, SimTime end) {
  std::exception_ptr ea, eb;
  std::thread ta([&] {
    try {
      LoopOptions opt;
      opt.end_time = end;
      opt.watchdog_ms = 20000;
      run_event_loop(a, opt);
    } catch (...) {
      ea = std::current_exception();
    }
  });
  std::thread tb([&] {
    try {
      LoopOptions opt;
      opt.end_time = end;
      opt.watchdog_ms = 20000;
      run_event_loop(b, opt);
    } catch (...) {
      eb = std::current_exception();
    }
  });
  ta.join();
  tb.join();
  if (ea) std::rethrow_exception(ea);
  if (eb) std::rethrow_exception(eb);
}

}  // namespace

TEST_CASE("empty simulation runs to end_time with only sync traffic") {
  auto [a, b] = create_duplex_channel(
      cfg("c", SimTime::from_ns(500), SimTime::from_ns(500)));
  Recorder simA("a"), simB("b");
  AdapterCounters ca, cb;
  a.out->attach_counters(&ca);
  b.out->attach_counters(&cb);
  simA.attach_in(a.in.get());
  simA.attach_out(a.out.get());
  simB.attach_in(b.in.get());
  simB.attach_out(b.out.get());

  SimTime end = SimTime::from_us(100);
  run_pair(simA, simB, end);
  CHECK(simA.now() == end);
  CHECK(simB.now() == end);
  CHECK(simA.log.empty());
  CHECK(simB.log.empty());
  // sync cadence: one sync per sync_interval per direction
  CHECK(ca.syncs_tx == end.ps / SimTime::from_ns(500).ps);
  CHECK(cb.syncs_tx == end.ps / SimTime::from_ns(500).ps);
  CHECK(ca.data_tx == 0);
}

TEST_CASE("single event processed exactly once at its timestamp") {
  Recorder sim("solo");
  int fired = 0;
  SimTime seen;
  sim.schedule(SimTime::from_us(5), [&] {
    fired++;
    seen = sim.now();
  });
  LoopOptions opt;
  opt.end_time = SimTime::from_ms(1);
  run_event_loop(sim, opt);
  CHECK(fired == 1);
  CHECK(seen == SimTime::from_us(5));
  CHECK(sim.now() == SimTime::from_ms(1));
}

TEST_CASE("events at end_time are not processed; clock parks at end") {
  Recorder sim("solo");
  int fired = 0;
  sim.schedule(SimTime::from_us(5), [&] { fired++; });
  LoopOptions opt;
  opt.end_time = SimTime::from_us(5);
  run_event_loop(sim, opt);
  CHECK(fired == 0);
  CHECK(sim.now() == SimTime::from_us(5));
}

TEST_CASE("same-time deliveries from two channels follow channel-id order") {
  // Two in-channels into sim C; peers send at the same send_time. The
  // delivery order must be by channel id regardless of arrival order.
  auto [a_side, c_from_a] = create_duplex_channel(
      cfg("ch.a", SimTime::from_ns(500), SimTime::from_ns(500)));
  auto [b_side, c_from_b] = create_duplex_channel(
      cfg("ch.b", SimTime::from_ns(500), SimTime::from_ns(500)));

  Recorder simC("c");
  simC.attach_in(c_from_a.in.get());
  simC.attach_out(c_from_a.out.get());
  simC.attach_in(c_from_b.in.get());
  simC.attach_out(c_from_b.out.get());

  // Channel b's message arrives physically first.
  b_side.out->send_data(SimTime::from_ns(100), bytes({2}));
  a_side.out->send_data(SimTime::from_ns(100), bytes({1}));
  b_side.out->flush_sync(SimTime::from_us(50));
  a_side.out->flush_sync(SimTime::from_us(50));

  LoopOptions opt;
  opt.end_time = SimTime::from_us(10);
  run_event_loop(simC, opt);

  REQUIRE(simC.log.size() == 2);
  CHECK(simC.log[0].second == "ch.a:1");
  CHECK(simC.log[1].second == "ch.b:2");
  CHECK(simC.log[0].first == SimTime::from_ns(600));
  CHECK(simC.log[1].first == SimTime::from_ns(600));
}

TEST_CASE("local events run before channel deliveries of equal time") {
  auto [peer, mine] = create_duplex_channel(
      cfg("ch", SimTime::from_ns(500), SimTime::from_ns(500)));
  std::vector<std::string> order;
  struct Hook : Recorder {
    using Recorder::Recorder;
    std::vector<std::string>* order = nullptr;
    void on_channel_message(InEndpoint& ep, ChannelMessage msg) override {
      Recorder::on_channel_message(ep, msg);
      order->push_back("channel");
    }
  };
  Hook sim("s");
  sim.order = &order;
  sim.attach_in(mine.in.get());
  sim.attach_out(mine.out.get());
  sim.schedule(SimTime::from_ns(600), [&] { order.push_back("local"); });

  peer.out->send_data(SimTime::from_ns(100), bytes({9}));
  peer.out->flush_sync(SimTime::from_us(20));

  LoopOptions opt;
  opt.end_time = SimTime::from_us(10);
  run_event_loop(sim, opt);

  REQUIRE(order.size() == 2);
  CHECK(order[0] == "local");
  CHECK(order[1] == "channel");
}

namespace {

// Deterministic ping-pong workload for the determinism property: A fires
// requests on a fixed schedule, B echoes them back.
struct PingPong : Recorder {
  using Recorder::Recorder;
  OutEndpoint* reply_out = nullptr;
  bool echo = false;

  void on_channel_message(InEndpoint& ep, ChannelMessage msg) override {
    Recorder::on_channel_message(ep, msg);
    if (echo) {
      auto payload = msg.payload;
      schedule(now() + SimTime::from_ns(100), [this, payload] {
        reply_out->send_data(now(), payload);
      });
    }
  }
};

uint64_t ping_pong_trace(SimTime sync_interval) {
  auto [a_half, b_half] = create_duplex_channel(
      cfg("ch", SimTime::from_ns(500), sync_interval));
  PingPong a("a"), b("b");
  a.reply_out = a_half.out.get();
  b.reply_out = b_half.out.get();
  b.echo = true;
  a.attach_in(a_half.in.get());
  a.attach_out(a_half.out.get());
  b.attach_in(b_half.in.get());
  b.attach_out(b_half.out.get());
  for (int i = 0; i < 200; i++) {
    SimTime t = SimTime::from_ns(700 * (i + 1));
    a.schedule(t, [&a, i] {
      a.reply_out->send_data(a.now(), {static_cast<uint8_t>(i)});
    });
  }
  run_pair(a, b, SimTime::from_ms(1));
  CHECK(a.log.size() == 200);  // every ping echoed
  return a.event_trace_hash() ^ (b.event_trace_hash() << 1);
}

}  // namespace

TEST_CASE("simulated outcome is independent of sync_interval and repeatable") {
  uint64_t h1 = ping_pong_trace(SimTime::from_ns(500));
  uint64_t h2 = ping_pong_trace(SimTime::from_ns(500));
  uint64_t h3 = ping_pong_trace(SimTime::from_ns(100));
  uint64_t h4 = ping_pong_trace(SimTime::from_ns(250));
  CHECK(h1 == h2);
  CHECK(h1 == h3);
  CHECK(h1 == h4);
}

TEST_CASE("deadlock watchdog aborts a stalled wait with diagnostics") {
  auto [peer, mine] = create_duplex_channel(
      cfg("ch", SimTime::from_ns(500), SimTime::from_ns(500)));
  Recorder sim("stuck");
  sim.attach_in(mine.in.get());
  sim.attach_out(mine.out.get());
  sim.schedule(SimTime::from_us(5), [] {});
  LoopOptions opt;
  opt.end_time = SimTime::from_ms(1);
  opt.watchdog_ms = 200;  // peer never syncs
  CHECK_THROWS_AS(run_event_loop(sim, opt), DeadlockError);
}

TEST_CASE("peer closing mid-run surfaces as a channel-closed error") {
  auto [peer, mine] = create_duplex_channel(
      cfg("ch", SimTime::from_ns(500), SimTime::from_ns(500)));
  Recorder sim("s");
  sim.attach_in(mine.in.get());
  sim.attach_out(mine.out.get());
  sim.schedule(SimTime::from_us(5), [] {});
  LoopOptions opt;
  opt.end_time = SimTime::from_ms(1);
  std::thread t([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
    peer.out->close();
  });
  CHECK_THROWS_AS(run_event_loop(sim, opt), ChannelClosedError);
  t.join();
}

TEST_CASE("clean shutdown flag stops the loop") {
  Recorder sim("s");
  std::atomic<bool> stop{false};
  sim.schedule(SimTime::from_us(1), [&] { stop.store(true); });
  for (int i = 2; i < 100; i++) sim.schedule(SimTime::from_us(i), [] {});
  LoopOptions opt;
  opt.end_time = SimTime::from_sec(1000);
  opt.stop_flag = &stop;
  CHECK(run_event_loop(sim, opt) == LoopExit::Stopped);
  CHECK(sim.now() < SimTime::from_sec(1000));
}

// ---------------------------------------------------------------------------
// Shared-memory channel

TEST_CASE("shm channel round-trips messages across both directions") {
  std::string name = "/splitsim.test." + std::to_string(getpid()) + ".rt";
  ShmChannel::unlink(name);
  auto c = cfg("shm", SimTime::from_ns(500), SimTime::from_ns(500));
  auto creator = ShmChannel::create(name, c, 16, 256);
  auto opener = ShmChannel::open(name, c, 1000);

  creator.out->send_data(SimTime::from_ns(100), bytes({1, 2, 3}));
  opener.in->poll();
  REQUIRE(opener.in->has_data());
  auto m = opener.in->pop();
  CHECK(m.payload == bytes({1, 2, 3}));
  CHECK(m.send_time == SimTime::from_ns(100));

  opener.out->send_data(SimTime::from_ns(200), bytes({4}));
  creator.in->poll();
  REQUIRE(creator.in->has_data());
  CHECK(creator.in->pop().payload == bytes({4}));
  ShmChannel::unlink(name);
}

TEST_CASE("shm open rejects mismatched parameters, naming both sides") {
  std::string name = "/splitsim.test." + std::to_string(getpid()) + ".mm";
  ShmChannel::unlink(name);
  auto c1 = cfg("shm", SimTime::from_ns(500), SimTime::from_ns(500));
  auto c2 = cfg("shm", SimTime::from_ns(600), SimTime::from_ns(500));
  auto creator = ShmChannel::create(name, c1, 16, 256);
  try {
    ShmChannel::open(name, c2, 1000);
    FAIL("expected StartupError");
  } catch (const StartupError& e) {
    std::string what = e.what();
    CHECK(what.find("500ns") != std::string::npos);
    CHECK(what.find("600ns") != std::string::npos);
  }
  ShmChannel::unlink(name);
}

TEST_CASE("shm ring wraps and back-pressures without losing messages") {
  std::string name = "/splitsim.test." + std::to_string(getpid()) + ".wrap";
  ShmChannel::unlink(name);
  auto c = cfg("shm", SimTime::from_ns(500), SimTime::from_ns(500));
  auto creator = ShmChannel::create(name, c, 8, 64);
  auto opener = ShmChannel::open(name, c, 1000);

  std::thread producer([&] {
    for (int i = 0; i < 1000; i++)
      creator.out->send_data(SimTime::from_ns(i + 1),
                             {static_cast<uint8_t>(i & 0xff)});
  });
  int received = 0;
  while (received < 1000) {
    opener.in->poll();
    while (opener.in->has_data()) {
      auto m = opener.in->pop();
      CHECK(m.payload[0] == (received & 0xff));
      received++;
    }
  }
  producer.join();
  ShmChannel::unlink(name);
}

TEST_CASE("shm open times out when no segment appears") {
  CHECK_THROWS_AS(
      ShmChannel::open("/splitsim.test.nonexistent",
                       cfg("c", SimTime::from_ns(500), SimTime::from_ns(500)),
                       50),
      StartupError);
}
