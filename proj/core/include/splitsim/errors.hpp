#pragma once

#include <stdexcept>
#include <string>

namespace splitsim {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration (bad channel parameters, bad system config, ...).
struct ConfigError : Error {
  using Error::Error;
};

// A simulator violated the channel contract (timestamp regression,
// malformed bytes on the wire). Indicates a bug, not an operational issue.
struct ProtocolError : Error {
  using Error::Error;
};

// Handshake mismatch or timeout while bringing a simulation up.
struct StartupError : Error {
  using Error::Error;
};

// Peer went away while we still depended on it.
struct ChannelClosedError : Error {
  using Error::Error;
};

// The conservative-sync watchdog gave up on a stalled simulation.
struct DeadlockError : Error {
  using Error::Error;
};

}  // namespace splitsim
