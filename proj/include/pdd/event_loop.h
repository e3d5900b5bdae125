#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "pdd/timing.h"

namespace pdd {

// Single-threaded discrete-event scheduler. Events at equal times run in
// scheduling order, which makes traces reproducible.
class EventLoop {
 public:
  using Callback = std::function<void()>;

  void schedule_at(Millis when, Callback cb) {
    queue_.push(Entry{when < now_ ? now_ : when, seq_++, std::move(cb)});
  }
  void schedule_in(Millis delay, Callback cb) { schedule_at(now_ + delay, std::move(cb)); }

  // Runs until the queue drains or stop() is called.
  void run() {
    stopped_ = false;
    while (!stopped_ && !queue_.empty()) {
      Entry e = queue_.top();
      queue_.pop();
      now_ = e.when;
      ++processed_;
      e.cb();
    }
  }

  void stop() { stopped_ = true; }
  Millis now() const { return now_; }
  std::uint64_t processed() const { return processed_; }
  bool empty() const { return queue_.empty(); }

 private:
  struct Entry {
    Millis when;
    std::uint64_t seq;
    Callback cb;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.when != b.when ? a.when > b.when : a.seq > b.seq;
    }
  };

  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  Millis now_ = 0.0;
  std::uint64_t seq_ = 0;
  std::uint64_t processed_ = 0;
  bool stopped_ = false;
};

}  // namespace pdd
