#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pblab {

/// Category of a library failure. The CLI maps these onto exit codes.
enum class ErrorKind {
    config,        ///< invalid experiment configuration or unusable input file
    parse,         ///< malformed profile / model file
    range,         ///< a probability outside [0,1)
    size,          ///< input too large (or too small) for the requested method
    domain,        ///< argument outside a function's mathematical domain
    hypothesis,    ///< a theorem's standing assumption does not hold
    conditioning,  ///< floating-point evaluation would be unreliable
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::parse: return "parse";
        case ErrorKind::range: return "range";
        case ErrorKind::size: return "size";
        case ErrorKind::domain: return "domain";
        case ErrorKind::hypothesis: return "hypothesis";
        case ErrorKind::conditioning: return "conditioning";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace pblab
