#pragma once

#include <stdexcept>
#include <string>

namespace citest {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SupportViolation : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct InvalidDistribution : Error {
    using Error::Error;
};

struct InfeasibleParameters : Error {
    using Error::Error;
};

struct InvalidThreshold : Error {
    using Error::Error;
};

struct InsufficientSamples : Error {
    using Error::Error;
};

struct OddSampleCount : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

}  // namespace citest
