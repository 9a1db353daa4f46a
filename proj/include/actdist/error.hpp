#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace actdist {

/// Invalid input or violated precondition. The CLI maps this to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable or unwritable file. The CLI maps this to exit code 1.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using WarningHandler = std::function<void(const std::string&)>;

// Warnings go to stderr unless a handler is installed. Returns the previous
// handler so callers (mostly tests) can restore it.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace actdist
