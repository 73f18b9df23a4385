#pragma once

#include <stdexcept>
#include <string>

namespace multipa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// model-clients
class ModelUnavailable : public Error {
 public:
  using Error::Error;
};
class EmptyTranscript : public Error {
 public:
  using Error::Error;
};
class AlignmentFailure : public Error {
 public:
  using Error::Error;
};
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// assessment-model
class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};
class AssessmentUnavailable : public Error {
 public:
  using Error::Error;
};
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// evaluation
class SchemaViolation : public Error {
 public:
  SchemaViolation(const std::string& record_id, const std::string& what)
      : Error(record_id.empty() ? what : record_id + ": " + what), record_id_(record_id) {}
  const std::string& record_id() const noexcept { return record_id_; }

 private:
  std::string record_id_;
};
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace multipa
