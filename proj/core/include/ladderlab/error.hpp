#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ladderlab {

enum class ErrorKind {
    Domain,          // point outside the surface / grid
    Invariant,       // metric or spectrum invariant violated
    Precondition,    // caller-side argument contract
    Resolution,      // grid too coarse
    Capacity,        // enumeration exceeds memory budget
    Incompleteness,  // requested window beyond a completeness guarantee
    NonrealSpectrum, // pencil produced |Im lambda| >= real_tol
    Solver,          // linear algebra failure
    Integration,     // shell drift beyond the hard cap
    Stiffness,       // adaptive step rejection cascade
    Fit,             // degenerate design matrix
    Accuracy,        // tail bound exceeds the requested accuracy
    EmptyLadder,     // nu below the bottom of the mass shell
    Cache,           // cache corruption
};

std::string_view to_string(ErrorKind kind);

/// Stable process exit code for scripting: 2 validation, 3 incompleteness, 4 numerical.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool condition, ErrorKind kind, const std::string& what)
{
    if (!condition) fail(kind, what);
}

} // namespace ladderlab
