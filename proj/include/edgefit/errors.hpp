#pragma once

#include <stdexcept>
#include <string>

namespace edgefit {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(what + ": " + path), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Malformed or inconsistent file content. `field()` names the offending entry.
class ParseError : public Error {
 public:
  ParseError(const std::string& field, const std::string& what)
      : Error("parse error in '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Geometric degeneracy: rank-deficient pose system, empty contour, coincident points.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class NoEdgesError : public Error {
 public:
  using Error::Error;
};

/// Mesh connectivity violates the manifold requirement.
class TopologyError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, int iterations)
      : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
        iterations_(iterations) {}
  int iterations() const { return iterations_; }

 private:
  int iterations_;
};

}  // namespace edgefit
