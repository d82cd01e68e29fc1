#pragma once

#include <stdexcept>
#include <string>

namespace qinstr {

// Base class for every error the library throws on purpose. Callers that
// want blanket handling can catch this; tests catch the specific types.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimMismatch : Error {
    using Error::Error;
};
struct NotHermitian : Error {
    using Error::Error;
};
struct SpaceMismatch : Error {
    using Error::Error;
};
struct NotProductSpace : Error {
    using Error::Error;
};
struct UnknownLabel : Error {
    using Error::Error;
};
struct ExplosionCap : Error {
    using Error::Error;
};
struct InvalidParams : Error {
    using Error::Error;
};
struct GridDeficient : Error {
    using Error::Error;
};
struct NotConserved : Error {
    using Error::Error;
};
struct NotEquivalent : Error {
    using Error::Error;
};
struct DeadEnd : Error {
    using Error::Error;
};
// Raised when a preorder LP exceeds the size budget and the certified
// lower/upper bounds straddle the requested tolerance, so no honest
// verdict is possible without more compute.
struct LpBudgetExceeded : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};

} // namespace qinstr
