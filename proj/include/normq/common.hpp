// Copyright (C) 2026 The normq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace normq {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid values passed to an operation (shape mismatch, negative entries, ...).
struct DomainError : Error {
    using Error::Error;
};

// Invalid configuration (bit width out of range, bad flag combination, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Malformed serialized data; the message names the byte offset where possible.
struct FormatError : Error {
    using Error::Error;
};

// Malformed text input; the message names the line number.
struct ParseError : Error {
    using Error::Error;
};

// A sequence has probability zero under the model. Callers that merely score
// sequences get the -inf sentinel instead; this is thrown where posteriors
// would be undefined.
struct SequenceImpossibleError : Error {
    SequenceImpossibleError() : Error("sequence impossible under model") {}
};

}  // namespace normq
