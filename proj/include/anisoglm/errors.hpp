#pragma once

#include <stdexcept>
#include <string>

namespace anisoglm {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown by factorizations when a pivot is not strictly positive.
/// `pivot` is the index (in the original, unpermuted numbering) of the
/// offending row.
struct NotPositiveDefiniteError : Error {
    int pivot;
    NotPositiveDefiniteError(int pivot_idx, const std::string& what)
        : Error(what), pivot(pivot_idx) {}
};

} // namespace anisoglm
