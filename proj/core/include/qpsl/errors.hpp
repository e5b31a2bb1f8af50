#pragma once

#include <stdexcept>
#include <string>

namespace qpsl {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Construction-time validation failures (non-real Fourier block, bad bounds, ...).
struct InvalidSpec : Error {
    using Error::Error;
};

// E sits on (or within 1 ulp of) an eigenvalue of the requested box.
struct SingularBox : Error {
    using Error::Error;
};

// Inverse iteration failed to reach the residual target.
struct IllConditioned : Error {
    using Error::Error;
};

// Too few usable samples for a decay fit.
struct TooShort : Error {
    using Error::Error;
};

// A solution trace vanishes on two consecutive sites (so it is identically zero).
struct DegenerateTrace : Error {
    using Error::Error;
};

// Requested energy is inside the essential spectrum, no Weyl solution exists.
struct NotInGap : Error {
    using Error::Error;
};

// Gap-edge extrapolation did not stabilize.
struct NonConvergent : Error {
    using Error::Error;
};

// Fixed-point constructors: no n0 within the horizon satisfies the contraction threshold.
struct NoContraction : Error {
    using Error::Error;
};

// Counts at horizon and horizon/2 disagree.
struct Unstable : Error {
    using Error::Error;
};

// IDS scan never left the {0,1} neighborhoods, no spectral edge found.
struct EdgeNotFound : Error {
    using Error::Error;
};

// Configuration parsing, with 1-based line numbers for diagnostics.
struct ConfigError : Error {
    int line = 0;
    ConfigError(const std::string& msg, int line_no)
        : Error("config:" + std::to_string(line_no) + ": " + msg), line(line_no) {}
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

} // namespace qpsl
