#pragma once

#include <stdexcept>
#include <string>

namespace team {

// Error categories map 1:1 to CLI exit codes (see tools/team_main.cpp).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct input_error : std::runtime_error {
    explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed binary container (IDX file, model checkpoint).
struct format_error : std::runtime_error {
    explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Device/cloud message inconsistency during a round.
struct protocol_error : std::runtime_error {
    explicit protocol_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised by the gradient-check oracle itself (non-finite loss, bad eps handled as input_error).
struct oracle_error : std::runtime_error {
    explicit oracle_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace team
