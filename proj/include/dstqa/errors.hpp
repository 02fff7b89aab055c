#pragma once

#include <stdexcept>
#include <string>

namespace dstqa {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file: bad JSON or a document that does not follow the schema.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& where, const std::string& what)
      : Error(where.empty() ? what : where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Operation applied to a question of the wrong mode (e.g. extending a span question).
class ModeError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

}  // namespace dstqa
