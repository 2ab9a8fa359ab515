#pragma once

#include <stdexcept>
#include <string>

namespace sid {

// Error classes map 1:1 onto the C API status codes.
enum class Errc {
    io = 1,       // missing/unreadable/unwritable files
    parse = 2,    // malformed input (manifest, config, checkpoint, cache)
    invalid = 3,  // invariant or precondition violation
    state = 4,    // operation not valid in the current state
    numeric = 5,  // NaN/Inf or other numeric failure
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace sid
