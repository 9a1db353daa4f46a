#include "actdist/error.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace actdist {

namespace {

std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& handler_slot() {
  static WarningHandler h;
  return h;
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(handler_mutex());
  return std::exchange(handler_slot(), std::move(handler));
}

void warn(const std::string& message) {
  std::lock_guard lock(handler_mutex());
  if (handler_slot()) {
    handler_slot()(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

}  // namespace actdist
