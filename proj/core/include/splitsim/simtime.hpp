#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <string>

namespace splitsim {

// Simulated time as integer picoseconds since simulation start. Integer ps
// keeps sub-nanosecond link math exact; 64 bits cover > 10^7 simulated
// seconds without overflow.
struct SimTime {
  uint64_t ps = 0;

  constexpr SimTime() = default;
  constexpr explicit SimTime(uint64_t picoseconds) : ps(picoseconds) {}

  static constexpr SimTime zero() { return SimTime(0); }
  static constexpr SimTime max() {
    return SimTime(std::numeric_limits<uint64_t>::max());
  }
  static constexpr SimTime from_ps(uint64_t v) { return SimTime(v); }
  static constexpr SimTime from_ns(uint64_t v) { return SimTime(v * 1000ull); }
  static constexpr SimTime from_us(uint64_t v) {
    return SimTime(v * 1000000ull);
  }
  static constexpr SimTime from_ms(uint64_t v) {
    return SimTime(v * 1000000000ull);
  }
  static constexpr SimTime from_sec(uint64_t v) {
    return SimTime(v * 1000000000000ull);
  }

  constexpr double to_sec() const { return static_cast<double>(ps) * 1e-12; }
  constexpr double to_ns() const { return static_cast<double>(ps) * 1e-3; }

  constexpr auto operator<=>(const SimTime&) const = default;

  constexpr SimTime operator+(SimTime o) const { return SimTime(ps + o.ps); }
  constexpr SimTime operator-(SimTime o) const { return SimTime(ps - o.ps); }
  constexpr SimTime& operator+=(SimTime o) {
    ps += o.ps;
    return *this;
  }
  constexpr SimTime operator*(uint64_t k) const { return SimTime(ps * k); }
};

// "1.5us", "500ns", "100ms", "1s", "250ps" or a bare picosecond count.
SimTime parse_simtime(const std::string& text);
std::string format_simtime(SimTime t);

}  // namespace splitsim
