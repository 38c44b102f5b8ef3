#pragma once

#include <stdexcept>
#include <string>

namespace dsgan {

/// Requested configuration exists conceptually but is deliberately not supported
/// (e.g. exhaustive enumeration for grids larger than 2x2).
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A loss or gradient went non-finite during training. Carries the path of the
/// last checkpoint known to be good, if any.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::string last_checkpoint = {})
        : std::runtime_error(what), last_checkpoint_(std::move(last_checkpoint)) {}

    const std::string& last_checkpoint() const noexcept { return last_checkpoint_; }

private:
    std::string last_checkpoint_;
};

/// Bad user-facing configuration (unknown key, invariant violation, missing path).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail
}  // namespace dsgan
