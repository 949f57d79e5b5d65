#pragma once

#include <iostream>
#include <mutex>
#include <sstream>
#include <string>

namespace persona::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3 };

Level& threshold();
std::mutex& mutex();

void write(Level level, const std::string& msg);

template <typename... Args>
void emit(Level level, Args&&... args) {
    if (level < threshold()) return;
    std::ostringstream ss;
    (ss << ... << args);
    write(level, ss.str());
}

template <typename... Args>
void debug(Args&&... args) {
    emit(Level::debug, std::forward<Args>(args)...);
}
template <typename... Args>
void info(Args&&... args) {
    emit(Level::info, std::forward<Args>(args)...);
}
template <typename... Args>
void warn(Args&&... args) {
    emit(Level::warn, std::forward<Args>(args)...);
}
template <typename... Args>
void error(Args&&... args) {
    emit(Level::error, std::forward<Args>(args)...);
}

} // namespace persona::log
