#pragma once

#include <stdexcept>
#include <string>

namespace retrorag {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed corpus/dataset input, duplicate ids.
class IngestError : public Error {
public:
    using Error::Error;
};

// Unknown passage id, missing template, missing placeholder value.
class LookupError : public Error {
public:
    using Error::Error;
};

// Index directory missing, unreadable, or written by an incompatible version.
class IndexFormatError : public Error {
public:
    using Error::Error;
};

// Invalid RunConfig / GenerationParams / CLI values.
class ConfigError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

// Network failure or 5xx; the client retries these.
class TransportError : public Error {
public:
    using Error::Error;
};

// Backend answered, but with something we cannot interpret.
class ProtocolError : public Error {
public:
    using Error::Error;
};

// Scripted backend saw a prompt that no fixture rule covers.
class NoMatchingRuleError : public Error {
public:
    using Error::Error;
};

}  // namespace retrorag
