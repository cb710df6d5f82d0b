#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evedge {

enum class ErrorKind {
  parse,
  bounds,
  ordering,
  spec,
  shape,
  capacity,
  domain,
  validation,
  profile_incomplete,
  cycle,
  candidate_invalid,
  link,
  infeasible_instance,
  empty_input,
  io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base of every error raised by the library. The kind decides how the CLI
/// reports it: input problems are validation errors (exit 1), capacity and
/// empty-input misuse are runtime errors (exit 2).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  bool is_validation() const noexcept {
    return kind_ != ErrorKind::capacity && kind_ != ErrorKind::empty_input &&
           kind_ != ErrorKind::io;
  }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class KindError : public Error {
 public:
  explicit KindError(const std::string& what) : Error(K, what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

using BoundsError = KindError<ErrorKind::bounds>;
using OrderingError = KindError<ErrorKind::ordering>;
using SpecError = KindError<ErrorKind::spec>;
using ShapeError = KindError<ErrorKind::shape>;
using CapacityError = KindError<ErrorKind::capacity>;
using DomainError = KindError<ErrorKind::domain>;
using ValidationError = KindError<ErrorKind::validation>;
using ProfileIncompleteError = KindError<ErrorKind::profile_incomplete>;
using CycleError = KindError<ErrorKind::cycle>;
using CandidateInvalidError = KindError<ErrorKind::candidate_invalid>;
using LinkError = KindError<ErrorKind::link>;
using InfeasibleInstanceError = KindError<ErrorKind::infeasible_instance>;
using EmptyInputError = KindError<ErrorKind::empty_input>;
using IoError = KindError<ErrorKind::io>;

}  // namespace evedge
