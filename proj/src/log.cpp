#include "momenta/log.hpp"

#include <atomic>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace momenta::log {

namespace {

Level from_env() {
  const char* v = std::getenv("MOMENTA_LOG");
  if (!v) return Level::Warn;
  if (!std::strcmp(v, "error")) return Level::Error;
  if (!std::strcmp(v, "info")) return Level::Info;
  if (!std::strcmp(v, "debug")) return Level::Debug;
  return Level::Warn;
}

std::atomic<int>& current() {
  static std::atomic<int> lvl{static_cast<int>(from_env())};
  return lvl;
}

const char* tag(Level l) {
  switch (l) {
    case Level::Error: return "error";
    case Level::Warn: return "warn";
    case Level::Info: return "info";
    case Level::Debug: return "debug";
  }
  return "";
}

}  // namespace

Level level() { return static_cast<Level>(current().load()); }
void set_level(Level l) { current().store(static_cast<int>(l)); }
bool enabled(Level l) { return static_cast<int>(l) <= current().load(); }

void write(Level l, const char* fmt, ...) {
  std::fprintf(stderr, "[momenta %s] ", tag(l));
  va_list ap;
  va_start(ap, fmt);
  std::vfprintf(stderr, fmt, ap);
  va_end(ap);
  std::fputc('\n', stderr);
}

}  // namespace momenta::log
