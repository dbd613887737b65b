#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace nvsim {

using Bytes = std::uint64_t;
using BytesPerSecond = std::uint64_t;
using FlopsPerSecond = std::uint64_t;

/// Simulated time. The clock is integral nanoseconds; there is no
/// floating-point accumulation anywhere on the time axis.
using SimDuration = std::chrono::duration<std::int64_t, std::nano>;

struct SimClock {
  using rep = std::int64_t;
  using period = std::nano;
  using duration = SimDuration;
  using time_point = std::chrono::time_point<SimClock, SimDuration>;
  static constexpr bool is_steady = true;
};

using SimTime = SimClock::time_point;

inline constexpr SimTime kSimEpoch{};

constexpr std::int64_t to_ns(SimTime t) { return t.time_since_epoch().count(); }
constexpr std::int64_t to_ns(SimDuration d) { return d.count(); }
constexpr SimTime at_ns(std::int64_t ns) { return SimTime{SimDuration{ns}}; }
constexpr SimDuration seconds(std::int64_t s) { return std::chrono::seconds{s}; }

// Parsers accept a decimal number followed by a unit, e.g. "12.5 GB/s",
// "3TB", "300 s", "100 ns". Decimal (SI) and binary (IEC) prefixes are both
// understood. Results must be exact integers in base units; anything else
// raises SimError(UnitError).
Bytes parse_bytes(std::string_view text);
BytesPerSecond parse_bandwidth(std::string_view text);
FlopsPerSecond parse_flops(std::string_view text);
SimDuration parse_duration(std::string_view text);

// Canonical, exactly re-parsable renderings in base units.
std::string format_bytes(Bytes b);
std::string format_bandwidth(BytesPerSecond bw);
std::string format_flops(FlopsPerSecond f);
std::string format_duration(SimDuration d);

/// Seconds with nine decimals, computed from the integer nanosecond count.
std::string format_seconds(SimDuration d);
inline std::string format_seconds(SimTime t) { return format_seconds(t.time_since_epoch()); }

}  // namespace nvsim
