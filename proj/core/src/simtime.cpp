#include "splitsim/simtime.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace splitsim {

SimTime parse_simtime(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty time value");
  size_t pos = 0;
  double value = 0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad time value: '" + text + "'");
  }
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) pos++;
  std::string unit = text.substr(pos);
  double scale;
  if (unit.empty() || unit == "ps")
    scale = 1.0;
  else if (unit == "ns")
    scale = 1e3;
  else if (unit == "us")
    scale = 1e6;
  else if (unit == "ms")
    scale = 1e9;
  else if (unit == "s")
    scale = 1e12;
  else
    throw std::invalid_argument("bad time unit in '" + text + "'");
  double ps = value * scale;
  if (ps < 0 || ps > 1.8e19 || std::isnan(ps))
    throw std::invalid_argument("time out of range: '" + text + "'");
  return SimTime(static_cast<uint64_t>(std::llround(ps)));
}

std::string format_simtime(SimTime t) {
  std::ostringstream os;
  uint64_t v = t.ps;
  if (v == 0) return "0ps";
  if (v % 1000000000000ull == 0)
    os << v / 1000000000000ull << "s";
  else if (v % 1000000000ull == 0)
    os << v / 1000000000ull << "ms";
  else if (v % 1000000ull == 0)
    os << v / 1000000ull << "us";
  else if (v % 1000ull == 0)
    os << v / 1000ull << "ns";
  else
    os << v << "ps";
  return os.str();
}

}  // namespace splitsim
