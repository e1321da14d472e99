#pragma once

#include <stdexcept>
#include <string>

namespace nustab {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- configuration / validation ---

class ParseError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class RankError : public Error {
public:
    using Error::Error;
};

class StabilizabilityError : public Error {
public:
    using Error::Error;
};

class WindowError : public Error {
public:
    using Error::Error;
};

// --- numerics ---

class OverflowError : public Error {
public:
    using Error::Error;
};

// --- gain synthesis ---

class ControllabilityError : public Error {
public:
    using Error::Error;
};

class PlacementError : public Error {
public:
    using Error::Error;
};

class SpectrumError : public Error {
public:
    using Error::Error;
};

class DegenerateEigenvectorError : public Error {
public:
    using Error::Error;
};

// --- singular value assignment ---

class InterlacingError : public Error {
public:
    using Error::Error;
};

class InfeasibleAtPeriodError : public Error {
public:
    using Error::Error;
};

class PostCheckError : public Error {
public:
    using Error::Error;
};

// --- certification ---

class NoStabilizablePeriodError : public Error {
public:
    using Error::Error;
};

class PeriodOutOfCertificateError : public Error {
public:
    using Error::Error;
};

} // namespace nustab
