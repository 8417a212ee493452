#pragma once

#include <stdexcept>
#include <string>

namespace gwnet {

// Error taxonomy shared by the whole library. The CLI maps these onto
// process exit codes (config -> 2, format/io -> 3).

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

struct InputError : std::runtime_error {
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Checksum mismatch on checkpoint load.
struct CorruptionError : FormatError {
    explicit CorruptionError(const std::string& what) : FormatError(what) {}
};

struct StateError : std::runtime_error {
    explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gwnet
