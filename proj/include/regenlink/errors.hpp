#pragma once

#include <stdexcept>

namespace regenlink {

// Loop gain hit unity: the circuit has crossed from amplification into
// sustained oscillation and the requested quantity is undefined.
class OscillationError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Demodulator could not locate a usable symbol clock in the envelope.
class SyncError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Rejected configuration: bad field value, unknown name, unreadable file.
// The message carries the offending field's path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An optimizer objective returned a non-finite value.
class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace regenlink
