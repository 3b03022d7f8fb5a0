#pragma once
// Error taxonomy shared by all modules.
//
// Parse/validation errors name the offending file and record; contract
// errors keep the raw model output so callers can route it to review.

#include <stdexcept>
#include <string>

namespace ptod {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Provider reachable but the response violated its output contract
// even after corrective retries.
struct ContractError : std::runtime_error {
    ContractError(const std::string& msg, std::string raw)
        : std::runtime_error(msg), raw_text(std::move(raw)) {}
    std::string raw_text;
};

// Transient transport failure talking to a provider; retryable.
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// On-disk schema version does not match what this build reads.
struct SchemaVersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ptod
