#include "persona/log.hpp"

namespace persona::log {

Level& threshold() {
    static Level level = Level::info;
    return level;
}

std::mutex& mutex() {
    static std::mutex m;
    return m;
}

void write(Level level, const std::string& msg) {
    static const char* names[] = {"DEBUG", "INFO", "WARN", "ERROR"};
    std::lock_guard<std::mutex> lock(mutex());
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

} // namespace persona::log
