#include "ladderlab/error.hpp"

namespace ladderlab {

std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Invariant: return "invariant";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Resolution: return "resolution";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::Incompleteness: return "incompleteness";
    case ErrorKind::NonrealSpectrum: return "nonreal-spectrum";
    case ErrorKind::Solver: return "solver";
    case ErrorKind::Integration: return "integration";
    case ErrorKind::Stiffness: return "stiffness";
    case ErrorKind::Fit: return "fit";
    case ErrorKind::Accuracy: return "accuracy";
    case ErrorKind::EmptyLadder: return "empty-ladder";
    case ErrorKind::Cache: return "cache";
    }
    return "unknown";
}

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::Incompleteness:
        return 3;
    case ErrorKind::NonrealSpectrum:
    case ErrorKind::Solver:
    case ErrorKind::Integration:
    case ErrorKind::Stiffness:
    case ErrorKind::Fit:
    case ErrorKind::Accuracy:
        return 4;
    default:
        return 2;
    }
}

void fail(ErrorKind kind, const std::string& what)
{
    throw Error(kind, std::string(to_string(kind)) + " error: " + what);
}

} // namespace ladderlab
