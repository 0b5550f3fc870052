#pragma once

#include <stdexcept>
#include <string>

namespace bubbletree {

// Fixed-point map failed to contract.
struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Grid too coarse for the requested integral or derivative.
struct ResolutionError : std::runtime_error {
    explicit ResolutionError(const std::string& what) : std::runtime_error(what) {}
};

// Alternating scale sum lost positivity (levels out of order).
struct HierarchyOrderingError : std::runtime_error {
    explicit HierarchyOrderingError(const std::string& what) : std::runtime_error(what) {}
};

// Requested accuracy not reached (matching radius sensitivity, tails, ...).
struct AccuracyError : std::runtime_error {
    explicit AccuracyError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace bubbletree
