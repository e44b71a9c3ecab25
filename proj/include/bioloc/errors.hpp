#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bioloc {

// Range errors use std::out_of_range, value errors std::invalid_argument.
// The types below cover the failure modes that callers branch on.

/// Malformed input file. Carries the 1-based line (or byte offset for
/// binary formats) where parsing stopped.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t location)
        : std::runtime_error(what + " (at " + std::to_string(location) + ")"),
          location_(location) {}

    std::size_t location() const noexcept { return location_; }

private:
    std::size_t location_;
};

/// The pose cell network lost all of its activity. The localizer reacts by
/// reseeding; anyone else calling normalize()/estimate() directly sees this.
class DegenerateBeliefError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller-supplied callback broke its documented contract, e.g. a
/// likelihood function returning a value outside [0, 1].
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Invalid configuration (scenario, maze spec, CLI options). The message
/// names the offending field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bioloc
