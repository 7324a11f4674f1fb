#pragma once

#include <chrono>
#include <thread>

#include "ds/common.hpp"

namespace ds {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimeMs now_ms() const = 0;
  virtual void sleep_ms(TimeMs d) = 0;
};

// Virtual clock owned by the simulation event loop. sleep_ms advances time
// directly, which is only meaningful single-threaded.
class SimClock : public Clock {
 public:
  explicit SimClock(TimeMs start = 0) : now_(start) {}
  TimeMs now_ms() const override { return now_; }
  void sleep_ms(TimeMs d) override { now_ += d; }
  void set(TimeMs t) { now_ = t; }

 private:
  TimeMs now_;
};

class WallClock : public Clock {
 public:
  TimeMs now_ms() const override {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch())
        .count();
  }
  void sleep_ms(TimeMs d) override {
    std::this_thread::sleep_for(std::chrono::milliseconds(d));
  }
};

}  // namespace ds
