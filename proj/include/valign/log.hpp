#pragma once

#include <atomic>
#include <cstdio>

#include <fmt/format.h>

namespace valign::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

inline std::atomic<Level>& threshold() {
    static std::atomic<Level> level{Level::warn};
    return level;
}

inline void set_level(Level level) { threshold().store(level); }

template <typename... Args>
void write(Level level, fmt::format_string<Args...> format, Args&&... args) {
    if (level < threshold().load()) return;
    static constexpr const char* names[] = {"debug", "info", "warn", "error"};
    fmt::print(stderr, "[valign {}] {}\n", names[static_cast<int>(level)],
               fmt::format(format, std::forward<Args>(args)...));
}

template <typename... Args>
void info(fmt::format_string<Args...> format, Args&&... args) {
    write(Level::info, format, std::forward<Args>(args)...);
}

template <typename... Args>
void warn(fmt::format_string<Args...> format, Args&&... args) {
    write(Level::warn, format, std::forward<Args>(args)...);
}

template <typename... Args>
void debug(fmt::format_string<Args...> format, Args&&... args) {
    write(Level::debug, format, std::forward<Args>(args)...);
}

}  // namespace valign::log
