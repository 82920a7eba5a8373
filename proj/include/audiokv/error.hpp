// Copyright (C) 2026 The AudioKV Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <stdexcept>
#include <string>

namespace audiokv {

/// Root of every error raised by the library. The CLI maps subclasses of
/// InputError to exit status 2 and everything else to 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Errors caused by malformed or inconsistent user input.
class InputError : public Error {
public:
    using Error::Error;
};

class IoError : public InputError {
public:
    using InputError::InputError;
};

/// Bad magic, unsupported version or impossible dimensions in a trace file.
class FormatError : public InputError {
public:
    using InputError::InputError;
};

/// Well-formed data that violates a domain invariant (row sums, monotone lengths).
class IntegrityError : public InputError {
public:
    using InputError::InputError;
};

class DegenerateSpanError : public InputError {
public:
    using InputError::InputError;
};

class LengthMismatchError : public InputError {
public:
    using InputError::InputError;
};

class DimensionMismatchError : public InputError {
public:
    using InputError::InputError;
};

class BudgetTooSmallError : public InputError {
public:
    using InputError::InputError;
};

class CapacityBelowRecentError : public InputError {
public:
    using InputError::InputError;
};

class HorizonError : public InputError {
public:
    using InputError::InputError;
};

class ConfigError : public InputError {
public:
    using InputError::InputError;
};

}  // namespace audiokv
