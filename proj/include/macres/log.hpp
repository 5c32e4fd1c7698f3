#pragma once

// stderr logging; verbosity from RESOLVE_LOG (error|warn|info|debug, default warn).

#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>

namespace macres::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline Level threshold() {
    static const Level lvl = [] {
        const char* env = std::getenv("RESOLVE_LOG");
        if (!env) return Level::Warn;
        const std::string_view v(env);
        if (v == "error") return Level::Error;
        if (v == "info") return Level::Info;
        if (v == "debug") return Level::Debug;
        return Level::Warn;
    }();
    return lvl;
}

inline void emit(Level lvl, std::string_view msg) {
    if (static_cast<int>(lvl) > static_cast<int>(threshold())) return;
    static constexpr const char* kTag[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "[%s] %.*s\n", kTag[static_cast<int>(lvl)], static_cast<int>(msg.size()), msg.data());
}

inline void error(std::string_view m) { emit(Level::Error, m); }
inline void warn(std::string_view m) { emit(Level::Warn, m); }
inline void info(std::string_view m) { emit(Level::Info, m); }
inline void debug(std::string_view m) { emit(Level::Debug, m); }

}  // namespace macres::log
