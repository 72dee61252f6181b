#pragma once

#include <cstdint>
#include <queue>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace aergia {

enum class EventType { RoundStart, ProfileReport, ScheduleDispatch, OffloadHandoff, ModelSubmit, RoundEnd };

inline std::string_view to_string(EventType t) {
  switch (t) {
    case EventType::RoundStart: return "RoundStart";
    case EventType::ProfileReport: return "ProfileReport";
    case EventType::ScheduleDispatch: return "ScheduleDispatch";
    case EventType::OffloadHandoff: return "OffloadHandoff";
    case EventType::ModelSubmit: return "ModelSubmit";
    case EventType::RoundEnd: return "RoundEnd";
  }
  return "?";
}

// Full: all budgeted batches trained locally. Frozen: an offloading client's
// classifier-only finish. Offloaded: a helper returning a trained feature block.
enum class SubmitKind { Full, Frozen, Offloaded };

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  int round = 0;
  EventType type = EventType::RoundStart;
  int client = -1;
  SubmitKind submit = SubmitKind::Full;
  int weak_client = -1;  // for offloaded submissions: whose block this is
};

// Min-queue on (time, seq); seq is assigned at push time so simultaneous
// events pop in insertion order.
class EventQueue {
 public:
  void push(Event e) {
    if (e.time < now_) throw std::logic_error("event scheduled in the past");
    e.seq = next_seq_++;
    heap_.push(e);
  }

  Event pop() {
    if (heap_.empty()) throw std::logic_error("pop from empty event queue");
    Event e = heap_.top();
    heap_.pop();
    now_ = e.time;
    return e;
  }

  [[nodiscard]] bool empty() const { return heap_.empty(); }
  [[nodiscard]] double now() const { return now_; }
  void clear() {
    heap_ = {};
  }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;
};

}  // namespace aergia
