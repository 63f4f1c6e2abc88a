#ifndef MTE_ERROR_HPP
#define MTE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mte {

// Error categories map onto CLI exit codes: config -> 2, numeric -> 3,
// missing_artifact -> 4, everything else -> 1.
enum class ErrKind {
    contract,          // caller violated a documented precondition
    dimension,         // shape/length mismatch
    numeric,           // non-finite value encountered
    config,            // config file parse/validation failure
    io_truncated,      // file shorter than its header claims
    io_magic,          // wrong magic bytes
    io_version,        // format version not supported by this reader
    missing_artifact,  // referenced file does not exist
};

class Error : public std::runtime_error {
public:
    Error(ErrKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrKind kind() const { return kind_; }

private:
    ErrKind kind_;
};

[[noreturn]] inline void fail(ErrKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require(bool cond, ErrKind kind, const std::string& msg) {
    if (!cond) fail(kind, msg);
}

}  // namespace mte

#endif
