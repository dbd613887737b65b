#pragma once

// Private helpers shared by the cluster-config and workload readers.

#include <optional>
#include <string>
#include <string_view>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "nvsim/error.hpp"
#include "nvsim/units.hpp"

namespace nvsim::detail {

using nlohmann::json;

inline std::string line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return fmt::format("line {}, column {}", line, col);
}

inline json parse_json_text(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw SimError(ErrorCode::SyntaxError,
                   fmt::format("{}: {} ({})", what, line_col(text, e.byte == 0 ? 0 : e.byte - 1), e.what()));
  }
}

/// A cursor into a JSON document that remembers its path for diagnostics.
class Field {
 public:
  Field(const json& value, std::string path) : value_(&value), path_(std::move(path)) {}

  const json& value() const { return *value_; }
  const std::string& path() const { return path_; }

  bool has(std::string_view key) const { return value_->is_object() && value_->contains(key); }

  Field at(std::string_view key) const {
    if (!value_->is_object()) fail(ErrorCode::SyntaxError, "expected an object");
    auto it = value_->find(key);
    if (it == value_->end()) {
      throw SimError(ErrorCode::SyntaxError, fmt::format("{}: missing required field '{}'", path_, key));
    }
    return Field(*it, child(key));
  }

  std::optional<Field> maybe(std::string_view key) const {
    if (!has(key)) return std::nullopt;
    return at(key);
  }

  Field index(std::size_t i) const { return Field((*value_)[i], fmt::format("{}[{}]", path_, i)); }

  std::size_t array_size() const {
    if (!value_->is_array()) fail(ErrorCode::SyntaxError, "expected an array");
    return value_->size();
  }

  std::string string() const {
    if (!value_->is_string()) fail(ErrorCode::SyntaxError, "expected a string");
    return value_->get<std::string>();
  }

  std::uint64_t unsigned_int() const {
    if (!value_->is_number_unsigned()) {
      if (value_->is_number_integer() && value_->get<std::int64_t>() >= 0) return value_->get<std::uint64_t>();
      fail(ErrorCode::SyntaxError, "expected a non-negative integer");
    }
    return value_->get<std::uint64_t>();
  }

  double number() const {
    if (!value_->is_number()) fail(ErrorCode::SyntaxError, "expected a number");
    return value_->get<double>();
  }

  bool boolean() const {
    if (!value_->is_boolean()) fail(ErrorCode::SyntaxError, "expected true or false");
    return value_->get<bool>();
  }

  template <typename Parser>
  auto quantity(Parser parse) const {
    if (!value_->is_string()) fail(ErrorCode::UnitError, "expected a quantity string with an explicit unit");
    try {
      return parse(value_->get_ref<const std::string&>());
    } catch (const SimError& e) {
      fail(e.code(), e.what());
    }
  }

  [[noreturn]] void fail(ErrorCode code, std::string_view why) const {
    throw SimError(code, fmt::format("{}: {}", path_, why));
  }

 private:
  std::string child(std::string_view key) const { return path_.empty() ? std::string(key) : fmt::format("{}.{}", path_, key); }

  const json* value_;
  std::string path_;
};

}  // namespace nvsim::detail
