#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace canekit {

/// Shape disagreement between an operation's operands. `axis()` names the
/// offending extent (e.g. "channels", "width", "features").
class DimensionError : public std::invalid_argument {
public:
    DimensionError(std::string axis, const std::string& what)
        : std::invalid_argument(what + " [axis: " + axis + "]"), axis_(std::move(axis)) {}

    const std::string& axis() const noexcept { return axis_; }

private:
    std::string axis_;
};

/// Invalid structural parameters (group counts, channel arithmetic, extents).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Caller passed a value outside an operation's domain.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed bytes: undecodable images, corrupt weight containers.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A weight container that decodes cleanly but lacks required tensors.
class IncompleteContainerError : public FormatError {
public:
    explicit IncompleteContainerError(std::vector<std::string> missing)
        : FormatError(describe(missing)), missing_(std::move(missing)) {}

    const std::vector<std::string>& missing() const noexcept { return missing_; }

private:
    static std::string describe(const std::vector<std::string>& names) {
        std::string msg = "weight container is missing " + std::to_string(names.size()) + " tensor(s):";
        for (const auto& n : names) msg += " " + n;
        return msg;
    }

    std::vector<std::string> missing_;
};

/// Internal invariant broken by on-disk state (e.g. rename collisions).
class ConsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem failure; the message carries the path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace canekit
