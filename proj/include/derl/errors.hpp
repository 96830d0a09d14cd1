#pragma once

#include <stdexcept>
#include <string>

namespace derl {

// Bad shapes, bad config values, unknown keys.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Contract violations by the caller (stepping a finished episode, wrong
// batch length, empty inputs).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite losses or gradients. Aborts the run.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace derl
