#pragma once

#include <stdexcept>
#include <string>

namespace affinecrack {

// Base class for every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Key fails gcd(a, 26) = 1 or b out of range; also thrown when asking for a
// modular inverse of a non-coprime coefficient.
class KeyError : public Error {
 public:
  using Error::Error;
};

// Class index outside [0, 311].
class IndexRangeError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Token id outside the 27-symbol vocabulary.
class VocabError : public Error {
 public:
  using Error::Error;
};

// Class label outside the logit dimension.
class LabelError : public Error {
 public:
  using Error::Error;
};

class EmptyCorpusError : public Error {
 public:
  using Error::Error;
};

// Corpus shorter than the requested window length.
class InsufficientCorpusError : public Error {
 public:
  using Error::Error;
};

class EmptyDataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// The three loader failure modes are distinct so callers can tell a truncated
// or garbled container from a format-version skew from payload corruption.
class MalformedFileError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class DigestError : public Error {
 public:
  using Error::Error;
};

// Non-finite value where the optimizer requires finite arithmetic.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace affinecrack
