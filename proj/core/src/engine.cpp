#include "nvsim/engine.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "nvsim/error.hpp"

namespace nvsim {
namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 15> kKindNames{{
    {EventKind::submit, "submit"},
    {EventKind::reject, "reject"},
    {EventKind::allocate, "allocate"},
    {EventKind::mode_switch_start, "mode_switch_start"},
    {EventKind::mode_switch_end, "mode_switch_end"},
    {EventKind::fs_mount, "fs_mount"},
    {EventKind::stage_start, "stage_start"},
    {EventKind::stage_end, "stage_end"},
    {EventKind::job_start, "job_start"},
    {EventKind::io_start, "io_start"},
    {EventKind::io_end, "io_end"},
    {EventKind::job_end, "job_end"},
    {EventKind::scrub, "scrub"},
    {EventKind::expiry, "expiry"},
    {EventKind::internal, "internal"},
}};

bool is_token(std::string_view s) {
  if (s.empty()) return false;
  return std::none_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
}

template <typename Int>
Int parse_int(std::string_view s, std::size_t line) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw SimError(ErrorCode::SyntaxError, fmt::format("trace line {}: bad integer '{}'", line, s));
  }
  return v;
}

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

Fields& Fields::add(std::string key, std::string value) {
  if (!is_token(key) || key.find('=') != std::string::npos) {
    throw SimError(ErrorCode::InvalidArgument, fmt::format("bad trace field key '{}'", key));
  }
  if (!is_token(value)) throw SimError(ErrorCode::InvalidArgument, fmt::format("bad value for trace field '{}'", key));
  items_.emplace_back(std::move(key), std::move(value));
  return *this;
}

Fields& Fields::add(std::string key, std::int64_t value) { return add(std::move(key), std::to_string(value)); }
Fields& Fields::add(std::string key, std::uint64_t value) { return add(std::move(key), std::to_string(value)); }

std::optional<std::string_view> Fields::get(std::string_view key) const {
  for (const auto& [k, v] : items_) {
    if (k == key) return std::string_view(v);
  }
  return std::nullopt;
}

std::string_view Fields::at(std::string_view key) const {
  auto v = get(key);
  if (!v) throw SimError(ErrorCode::InvalidArgument, fmt::format("event has no field '{}'", key));
  return *v;
}

void Trace::append(Event e) {
  e.seq = events_.size();
  events_.push_back(std::move(e));
}

void Trace::write(std::ostream& out) const {
  out << kTraceHeader << '\n';
  std::string line;
  for (const Event& e : events_) {
    line = fmt::format("{} {} {}", to_ns(e.time), e.seq, nvsim::to_string(e.kind));
    for (const auto& [k, v] : e.fields.items()) {
      line += ' ';
      line += k;
      line += '=';
      line += v;
    }
    line += '\n';
    out << line;
  }
}

std::string Trace::to_string() const {
  std::ostringstream ss;
  write(ss);
  return ss.str();
}

Trace Trace::parse(std::string_view text) {
  Trace trace;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < line.size()) {
      const std::size_t sp = line.find(' ', pos);
      const std::size_t end = sp == std::string_view::npos ? line.size() : sp;
      if (end > pos) tokens.push_back(line.substr(pos, end - pos));
      pos = end + 1;
    }
    if (tokens.size() < 3) {
      throw SimError(ErrorCode::SyntaxError, fmt::format("trace line {}: expected '<ns> <seq> <kind> ...'", line_no));
    }
    Event e;
    e.time = at_ns(parse_int<std::int64_t>(tokens[0], line_no));
    e.seq = parse_int<std::uint64_t>(tokens[1], line_no);
    auto kind = parse_event_kind(tokens[2]);
    if (!kind) throw SimError(ErrorCode::SyntaxError, fmt::format("trace line {}: unknown event '{}'", line_no, tokens[2]));
    e.kind = *kind;
    for (std::size_t i = 3; i < tokens.size(); ++i) {
      const std::size_t eq = tokens[i].find('=');
      if (eq == std::string_view::npos || eq == 0) {
        throw SimError(ErrorCode::SyntaxError, fmt::format("trace line {}: malformed field '{}'", line_no, tokens[i]));
      }
      e.fields.add(std::string(tokens[i].substr(0, eq)), std::string(tokens[i].substr(eq + 1)));
    }
    trace.append(std::move(e));
  }
  return trace;
}

std::uint64_t Engine::schedule(SimTime at, EventKind kind, Fields fields, Action action) {
  return push(at, kind, std::move(fields), std::move(action), false);
}

std::uint64_t Engine::late_timer(SimTime at, Action action) {
  return push(at, EventKind::internal, {}, std::move(action), true);
}

std::uint64_t Engine::push(SimTime at, EventKind kind, Fields fields, Action action, bool late) {
  if (at < now_) {
    throw SimError(ErrorCode::EventInPast, fmt::format("event '{}' scheduled at {} ns, clock is at {} ns", to_string(kind),
                                                       to_ns(at), to_ns(now_)));
  }
  const std::uint64_t seq = next_seq_++;
  queue_.push_back(Scheduled{Event{at, seq, kind, std::move(fields)}, std::move(action), late});
  std::push_heap(queue_.begin(), queue_.end(), Later{});
  return seq;
}

void Engine::emit(EventKind kind, Fields fields) {
  if (kind == EventKind::internal) return;
  trace_.append(Event{now_, 0, kind, std::move(fields)});
}

std::optional<SimTime> Engine::next_time() const {
  if (queue_.empty()) return std::nullopt;
  return queue_.front().event.time;
}

void Engine::run(std::optional<SimTime> until) {
  while (!queue_.empty()) {
    if (until && queue_.front().event.time > *until) break;
    std::pop_heap(queue_.begin(), queue_.end(), Later{});
    Scheduled item = std::move(queue_.back());
    queue_.pop_back();
    now_ = item.event.time;
    if (item.event.kind != EventKind::internal) trace_.append(std::move(item.event));
    if (item.action) item.action();
    for (const Observer& obs : observers_) obs();
  }
  if (until && now_ < *until) now_ = *until;
}

TransferService::TransferId TransferService::start(std::vector<flow::ResourceId> path, Bytes bytes,
                                                   OnComplete on_complete, std::optional<BytesPerSecond> cap) {
  sync();
  const TransferId id = network_.add(flow::fine_from_ns(to_ns(engine_.now())), std::move(path), bytes, cap);
  callbacks_.emplace(id, std::move(on_complete));
  rearm();
  return id;
}

Bytes TransferService::cancel(TransferId id) {
  sync();
  if (!network_.active(id)) return 0;
  const Bytes delivered = network_.cancel(flow::fine_from_ns(to_ns(engine_.now())), id);
  callbacks_.erase(id);
  rearm();
  return delivered;
}

void TransferService::sync() {
  if (in_sync_) return;
  in_sync_ = true;
  const auto done = network_.advance_to(flow::fine_from_ns(to_ns(engine_.now())));
  in_sync_ = false;
  for (const flow::Completion& c : done) {
    completed_[c.id] = c.at;
    bytes_completed_ += network_.settlements().at(c.id).bytes;
    auto it = callbacks_.find(c.id);
    if (it == callbacks_.end()) continue;
    OnComplete cb = std::move(it->second);
    callbacks_.erase(it);
    // Completion handlers run as their own events.
    if (cb) engine_.timer(engine_.now(), [cb = std::move(cb), id = c.id] { cb(id); });
  }
  rearm();
}

void TransferService::rearm() {
  const auto next = network_.next_completion();
  if (!next) {
    armed_ns_.reset();
    ++wakeup_generation_;
    return;
  }
  const std::int64_t ns = std::max(flow::ceil_ns(*next), to_ns(engine_.now()));
  if (armed_ns_ == ns) return;
  armed_ns_ = ns;
  const std::uint64_t gen = ++wakeup_generation_;
  engine_.timer(at_ns(ns), [this, gen] {
    if (gen != wakeup_generation_) return;
    armed_ns_.reset();
    sync();
  });
}

std::optional<flow::FineTime> TransferService::completed_at(TransferId id) const {
  auto it = completed_.find(id);
  if (it == completed_.end()) return std::nullopt;
  return it->second;
}

}  // namespace nvsim
