#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nvsim/flow.hpp"
#include "nvsim/units.hpp"

namespace nvsim {

enum class EventKind {
  submit,
  reject,
  allocate,
  mode_switch_start,
  mode_switch_end,
  fs_mount,
  stage_start,
  stage_end,
  job_start,
  io_start,
  io_end,
  job_end,
  scrub,
  expiry,
  internal,  // timers and wakeups; never written to the trace
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

/// Ordered key/value payload. Keys and values never contain whitespace.
class Fields {
 public:
  Fields() = default;
  Fields(std::initializer_list<std::pair<std::string, std::string>> init) : items_(init) {}

  Fields& add(std::string key, std::string value);
  Fields& add(std::string key, std::int64_t value);
  Fields& add(std::string key, std::uint64_t value);
  Fields& add(std::string key, int value) { return add(std::move(key), static_cast<std::int64_t>(value)); }

  std::optional<std::string_view> get(std::string_view key) const;
  std::string_view at(std::string_view key) const;
  bool has(std::string_view key) const { return get(key).has_value(); }
  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

  friend bool operator==(const Fields&, const Fields&) = default;

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

struct Event {
  SimTime time{};
  std::uint64_t seq = 0;
  EventKind kind = EventKind::internal;
  Fields fields;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Emitted events in emission order. Serialized one record per line:
///   <timestamp_ns> <seq> <kind> key=value key=value ...
/// where seq is the record's position, so lines are ordered by (time, seq).
class Trace {
 public:
  /// Assigns the record's sequence number.
  void append(Event e);
  const std::vector<Event>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  void write(std::ostream& out) const;
  std::string to_string() const;
  static Trace parse(std::string_view text);

  friend bool operator==(const Trace&, const Trace&) = default;

 private:
  std::vector<Event> events_;
};

inline constexpr std::string_view kTraceHeader = "# nvsim-trace v1";

/// Single-threaded discrete-event core. Queued items run in (timestamp,
/// sequence) order; sequence numbers are assigned at scheduling time, so
/// simultaneous items run in the order they were scheduled.
class Engine {
 public:
  using Action = std::function<void()>;
  using Observer = std::function<void()>;

  SimTime now() const { return now_; }

  /// Queues a traced event; its record is emitted when it is processed, right
  /// before its action runs. Throws EventInPast if `at` precedes the clock.
  std::uint64_t schedule(SimTime at, EventKind kind, Fields fields, Action action = {});
  /// Queues an untraced action.
  std::uint64_t timer(SimTime at, Action action) { return schedule(at, EventKind::internal, {}, std::move(action)); }
  /// Queues an untraced action that runs after every ordinary item carrying
  /// the same timestamp, including ones scheduled later.
  std::uint64_t late_timer(SimTime at, Action action);
  /// Records an event that happens now.
  void emit(EventKind kind, Fields fields);

  /// Processes queued items until none are left, or until the next one lies
  /// beyond `until` (the clock then stops at `until`).
  void run(std::optional<SimTime> until = std::nullopt);
  bool idle() const { return queue_.empty(); }
  std::size_t pending() const { return queue_.size(); }
  std::optional<SimTime> next_time() const;

  /// Called after every processed queue item.
  void add_observer(Observer obs) { observers_.push_back(std::move(obs)); }

  const Trace& trace() const { return trace_; }

 private:
  struct Scheduled {
    Event event;
    Action action;
    bool late = false;
  };
  struct Later {
    bool operator()(const Scheduled& a, const Scheduled& b) const {
      if (a.event.time != b.event.time) return a.event.time > b.event.time;
      if (a.late != b.late) return a.late;
      return a.event.seq > b.event.seq;
    }
  };

  std::uint64_t push(SimTime at, EventKind kind, Fields fields, Action action, bool late);

  SimTime now_{};
  std::uint64_t next_seq_ = 0;
  std::vector<Scheduled> queue_;  // binary heap ordered by Later
  std::vector<Observer> observers_;
  Trace trace_;
};

/// Bandwidth-shared data movement on top of the engine. Whenever a transfer
/// starts, finishes or is cancelled, all rates are recomputed (max-min fair
/// over the bottleneck resources) and the next completion is re-armed.
class TransferService {
 public:
  using TransferId = flow::FlowId;
  using OnComplete = std::function<void(TransferId)>;

  explicit TransferService(Engine& engine) : engine_(engine) {}
  TransferService(const TransferService&) = delete;
  TransferService& operator=(const TransferService&) = delete;

  flow::ResourceId add_resource(std::string name, BytesPerSecond capacity) {
    return network_.add_resource(std::move(name), capacity);
  }

  TransferId start(std::vector<flow::ResourceId> path, Bytes bytes, OnComplete on_complete,
                   std::optional<BytesPerSecond> cap = std::nullopt);
  /// Returns the bytes delivered before cancellation.
  Bytes cancel(TransferId id);

  bool active(TransferId id) const { return network_.active(id); }
  const flow::FlowNetwork& network() const { return network_; }
  /// Brings the fluid model up to the engine clock, firing due completions.
  void sync();

  /// Exact model time at which a finished transfer completed.
  std::optional<flow::FineTime> completed_at(TransferId id) const;
  Bytes bytes_completed() const { return bytes_completed_; }

 private:
  void rearm();

  Engine& engine_;
  flow::FlowNetwork network_;
  std::map<TransferId, OnComplete> callbacks_;
  std::map<TransferId, flow::FineTime> completed_;
  Bytes bytes_completed_ = 0;
  std::uint64_t wakeup_generation_ = 0;
  std::optional<std::int64_t> armed_ns_;
  bool in_sync_ = false;
};

}  // namespace nvsim
