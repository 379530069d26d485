#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>

namespace phyloload {

// Malformed or missing input. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input parsed fine but a statistic is undefined for it (constant trait,
// singular covariance without jitter). The CLI maps this to exit code 1.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularCovarianceError : public DegenerateError {
 public:
  using DegenerateError::DegenerateError;
};

using WarningHandler = std::function<void(const std::string&)>;

inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return handler;
}

inline void warn(const std::string& msg) {
  if (auto& h = warning_handler()) h(msg);
}

// Installs a handler for the lifetime of the guard; tests use it to capture
// or silence warnings.
class ScopedWarningHandler {
 public:
  explicit ScopedWarningHandler(WarningHandler h)
      : saved_(std::exchange(warning_handler(), std::move(h))) {}
  ~ScopedWarningHandler() { warning_handler() = std::move(saved_); }
  ScopedWarningHandler(const ScopedWarningHandler&) = delete;
  ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

 private:
  WarningHandler saved_;
};

}  // namespace phyloload
