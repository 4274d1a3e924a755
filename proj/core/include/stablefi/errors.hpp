#pragma once

#include <stdexcept>
#include <string>

namespace stablefi {

// User-facing failures map to process exit code 1; anything derived from
// std::logic_error is an internal invariant violation and maps to exit code 2.

/// Malformed dataset, schema, or model file.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration (bad key, bad value, inconsistent combination).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem failure (missing file, unwritable directory).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace stablefi
