#pragma once

#include <stdexcept>
#include <string>

namespace cdb {

/// Base for every error raised by the library. `kind()` is the stable
/// machine-readable name used in CLI error JSON and service responses.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define CDB_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  };

CDB_DEFINE_ERROR(IngestError)
CDB_DEFINE_ERROR(SchemaError)
CDB_DEFINE_ERROR(LabelArityError)
CDB_DEFINE_ERROR(CycleError)
CDB_DEFINE_ERROR(DegenerateColumnError)
CDB_DEFINE_ERROR(InsufficientDataError)
CDB_DEFINE_ERROR(EditError)
CDB_DEFINE_ERROR(SimulationOrderError)
CDB_DEFINE_ERROR(EmptyGroupError)
CDB_DEFINE_ERROR(ParameterError)
CDB_DEFINE_ERROR(ConstantLabelError)

#undef CDB_DEFINE_ERROR

}  // namespace cdb
