#pragma once

#include <iostream>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace samner {

// Minimal logger. Pipeline stages report repairs, dropped candidates and
// parse fallbacks through it; tests use capture() to assert on warnings.
// Copies share state, so a Log can be handed to concurrent workers.
class Log {
 public:
  Log() : state_(std::make_shared<State>()) {}

  static Log capture() {
    Log log;
    log.state_->capture = true;
    return log;
  }

  void warn(const std::string& msg) const {
    std::lock_guard<std::mutex> lock(state_->mu);
    if (state_->capture) {
      state_->warnings.push_back(msg);
    } else {
      std::cerr << "[warn] " << msg << '\n';
    }
  }

  void info(const std::string& msg) const {
    std::lock_guard<std::mutex> lock(state_->mu);
    if (state_->capture) {
      state_->infos.push_back(msg);
    } else {
      std::cerr << "[info] " << msg << '\n';
    }
  }

  std::vector<std::string> warnings() const {
    std::lock_guard<std::mutex> lock(state_->mu);
    return state_->warnings;
  }

  bool has_warning_containing(const std::string& needle) const {
    std::lock_guard<std::mutex> lock(state_->mu);
    for (const auto& w : state_->warnings) {
      if (w.find(needle) != std::string::npos) return true;
    }
    return false;
  }

 private:
  struct State {
    bool capture = false;
    std::mutex mu;
    std::vector<std::string> warnings;
    std::vector<std::string> infos;
  };
  std::shared_ptr<State> state_;
};

// Shared stderr logger used when callers do not supply one.
inline Log& default_log() {
  static Log log;
  return log;
}

}  // namespace samner
