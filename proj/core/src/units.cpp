#include "nvsim/units.hpp"

#include <array>
#include <cctype>
#include <limits>
#include <optional>
#include <utility>

#include <fmt/format.h>

#include "nvsim/error.hpp"

namespace nvsim {
namespace {

using u128 = unsigned __int128;

struct Decimal {
  u128 mantissa = 0;  // digits with the decimal point removed
  unsigned scale = 0;  // number of fractional digits
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void unit_error(std::string_view text, std::string_view why) {
  throw SimError(ErrorCode::UnitError, fmt::format("'{}': {}", text, why));
}

// Splits "12.5 GB/s" into an exact decimal and the unit suffix.
std::pair<Decimal, std::string_view> split_quantity(std::string_view text) {
  const std::string_view s = trim(text);
  Decimal d;
  std::size_t i = 0;
  bool seen_digit = false;
  bool seen_point = false;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
    if (s[i] == '-') unit_error(text, "negative quantities are not allowed");
    ++i;
  }
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      seen_digit = true;
      if (d.mantissa > (std::numeric_limits<u128>::max() - 9) / 10) unit_error(text, "number too large");
      d.mantissa = d.mantissa * 10 + static_cast<unsigned>(c - '0');
      if (seen_point) ++d.scale;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (!seen_digit) unit_error(text, "expected a number");
  if (d.scale > 30) unit_error(text, "too many fractional digits");
  return {d, trim(s.substr(i))};
}

u128 pow10(unsigned n) {
  u128 r = 1;
  for (unsigned i = 0; i < n; ++i) r *= 10;
  return r;
}

std::uint64_t exact_value(std::string_view text, const Decimal& d, u128 multiplier) {
  const u128 denom = pow10(d.scale);
  if (multiplier != 0 && d.mantissa > std::numeric_limits<u128>::max() / multiplier) {
    unit_error(text, "value overflows");
  }
  const u128 scaled = d.mantissa * multiplier;
  if (scaled % denom != 0) unit_error(text, "value is not an integer in base units");
  const u128 v = scaled / denom;
  if (v > std::numeric_limits<std::uint64_t>::max()) unit_error(text, "value overflows 64 bits");
  return static_cast<std::uint64_t>(v);
}

struct Prefix {
  std::string_view symbol;
  u128 multiplier;
};

constexpr u128 kKilo = 1000;
constexpr std::array<Prefix, 13> kBytePrefixes{{
    {"", 1},
    {"K", kKilo},
    {"k", kKilo},
    {"M", kKilo * kKilo},
    {"G", kKilo * kKilo * kKilo},
    {"T", kKilo * kKilo * kKilo * kKilo},
    {"P", kKilo * kKilo * kKilo * kKilo * kKilo},
    {"E", kKilo * kKilo * kKilo * kKilo * kKilo * kKilo},
    {"Ki", u128{1} << 10},
    {"Mi", u128{1} << 20},
    {"Gi", u128{1} << 30},
    {"Ti", u128{1} << 40},
    {"Pi", u128{1} << 50},
}};

std::optional<u128> lookup_prefix(std::string_view p) {
  for (const auto& e : kBytePrefixes) {
    if (e.symbol == p) return e.multiplier;
  }
  return std::nullopt;
}

// Matches "<prefix><base>" where base is one of the given spellings.
std::optional<u128> match_unit(std::string_view unit, std::initializer_list<std::string_view> bases) {
  for (std::string_view base : bases) {
    if (unit.size() >= base.size() && unit.substr(unit.size() - base.size()) == base) {
      if (auto m = lookup_prefix(unit.substr(0, unit.size() - base.size()))) return m;
    }
  }
  return std::nullopt;
}

}  // namespace

Bytes parse_bytes(std::string_view text) {
  auto [d, unit] = split_quantity(text);
  if (unit.empty()) unit_error(text, "missing unit (e.g. \"GB\")");
  auto m = match_unit(unit, {"B"});
  if (!m) unit_error(text, fmt::format("unknown size unit '{}'", unit));
  return exact_value(text, d, *m);
}

BytesPerSecond parse_bandwidth(std::string_view text) {
  auto [d, unit] = split_quantity(text);
  if (unit.empty()) unit_error(text, "missing unit (e.g. \"GB/s\")");
  auto m = match_unit(unit, {"B/s", "Bps"});
  if (!m) unit_error(text, fmt::format("unknown bandwidth unit '{}'", unit));
  return exact_value(text, d, *m);
}

FlopsPerSecond parse_flops(std::string_view text) {
  auto [d, unit] = split_quantity(text);
  if (unit.empty()) unit_error(text, "missing unit (e.g. \"TFlop/s\")");
  auto m = match_unit(unit, {"Flop/s", "FLOP/s", "flop/s", "Flops", "FLOPS", "flops"});
  if (!m) unit_error(text, fmt::format("unknown compute-rate unit '{}'", unit));
  return exact_value(text, d, *m);
}

SimDuration parse_duration(std::string_view text) {
  auto [d, unit] = split_quantity(text);
  if (unit.empty()) unit_error(text, "missing unit (e.g. \"s\")");
  u128 ns_per_unit = 0;
  if (unit == "ns") ns_per_unit = 1;
  else if (unit == "us") ns_per_unit = 1000;
  else if (unit == "ms") ns_per_unit = 1000 * 1000;
  else if (unit == "s") ns_per_unit = 1000 * 1000 * 1000;
  else if (unit == "min") ns_per_unit = u128{60} * 1000 * 1000 * 1000;
  else if (unit == "h") ns_per_unit = u128{3600} * 1000 * 1000 * 1000;
  else if (unit == "d") ns_per_unit = u128{86400} * 1000 * 1000 * 1000;
  else unit_error(text, fmt::format("unknown time unit '{}'", unit));
  const std::uint64_t ns = exact_value(text, d, ns_per_unit);
  if (ns > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
    unit_error(text, "duration overflows");
  }
  return SimDuration{static_cast<std::int64_t>(ns)};
}

namespace {

// Largest decimal prefix that divides the value exactly.
std::string with_si_prefix(std::uint64_t v, std::string_view base) {
  static constexpr std::array<std::string_view, 7> kSymbols{"", "k", "M", "G", "T", "P", "E"};
  std::size_t p = 0;
  while (v != 0 && v % 1000 == 0 && p + 1 < kSymbols.size()) {
    v /= 1000;
    ++p;
  }
  return fmt::format("{} {}{}", v, kSymbols[p], base);
}

}  // namespace

std::string format_bytes(Bytes b) { return with_si_prefix(b, "B"); }
std::string format_bandwidth(BytesPerSecond bw) { return with_si_prefix(bw, "B/s"); }
std::string format_flops(FlopsPerSecond f) { return with_si_prefix(f, "Flop/s"); }

std::string format_duration(SimDuration d) {
  const std::int64_t ns = d.count();
  static constexpr std::array<std::pair<std::int64_t, std::string_view>, 5> kUnits{{
      {3'600'000'000'000, "h"},
      {60'000'000'000, "min"},
      {1'000'000'000, "s"},
      {1'000'000, "ms"},
      {1'000, "us"},
  }};
  if (ns != 0) {
    for (const auto& [scale, unit] : kUnits) {
      if (ns % scale == 0) return fmt::format("{} {}", ns / scale, unit);
    }
  }
  return fmt::format("{} ns", ns);
}

std::string format_seconds(SimDuration d) {
  std::int64_t ns = d.count();
  const bool negative = ns < 0;
  // Unsigned magnitude; covers INT64_MIN.
  const std::uint64_t mag = negative ? (~static_cast<std::uint64_t>(ns) + 1) : static_cast<std::uint64_t>(ns);
  return fmt::format("{}{}.{:09}", negative ? "-" : "", mag / 1'000'000'000ULL, mag % 1'000'000'000ULL);
}

}  // namespace nvsim
