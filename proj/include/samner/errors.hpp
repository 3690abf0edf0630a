#pragma once

#include <stdexcept>
#include <string>

namespace samner {

// Error categories map 1:1 onto CLI exit codes (see tools/samner_main.cpp).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& msg, bool transient, int http_status = 0)
      : std::runtime_error(msg), transient_(transient), http_status_(http_status) {}

  bool transient() const { return transient_; }
  int http_status() const { return http_status_; }

 private:
  bool transient_;
  int http_status_;
};

}  // namespace samner
