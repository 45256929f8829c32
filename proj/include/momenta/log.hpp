// Minimal stderr logging; verbosity from the MOMENTA_LOG environment variable
// (error, warn, info, debug; default warn).
#pragma once

namespace momenta::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level level();
void set_level(Level l);
bool enabled(Level l);
[[gnu::format(printf, 2, 3)]] void write(Level l, const char* fmt, ...);

}  // namespace momenta::log

#define MOMENTA_LOG_AT(lvl, ...)                                       \
  do {                                                                 \
    if (::momenta::log::enabled(lvl)) ::momenta::log::write(lvl, __VA_ARGS__); \
  } while (0)
#define MOMENTA_LOG_DEBUG(...) MOMENTA_LOG_AT(::momenta::log::Level::Debug, __VA_ARGS__)
#define MOMENTA_LOG_INFO(...) MOMENTA_LOG_AT(::momenta::log::Level::Info, __VA_ARGS__)
#define MOMENTA_LOG_WARN(...) MOMENTA_LOG_AT(::momenta::log::Level::Warn, __VA_ARGS__)
