#pragma once

#include <stdexcept>
#include <string>

namespace helios {

/// Base class for every error the toolkit throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Contract and validation failures (bad parameters, shapes, preconditions).
class ContractError : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public ContractError {
 public:
  using ContractError::ContractError;
};

class InvalidPose : public ContractError {
 public:
  using ContractError::ContractError;
};

class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

class EmptyScan : public ContractError {
 public:
  using ContractError::ContractError;
};

class UndefinedOverlap : public ContractError {
 public:
  using ContractError::ContractError;
};

class EmptyMining : public ContractError {
 public:
  using ContractError::ContractError;
};

class NumericError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// File-system and format failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace helios
