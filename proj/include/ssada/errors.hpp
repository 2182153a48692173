#pragma once

#include <stdexcept>
#include <string>

namespace ssada {

// Bad user-supplied values (specs, configs, CLI arguments). CLI exit code 1.
struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / serialization failures. CLI exit code 2.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken call-site contracts (shape mismatches, out-of-range requests).
struct contract_error : std::logic_error {
    explicit contract_error(const std::string& msg) : std::logic_error(msg) {}
};

} // namespace ssada
