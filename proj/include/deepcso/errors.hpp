#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace deepcso {

// Base of every error the library raises. `domain()` is the owning module,
// used by the CLI to produce module-qualified messages.
class Error : public std::runtime_error {
 public:
  Error(std::string domain, const std::string& what)
      : std::runtime_error(what), domain_(std::move(domain)) {}
  const std::string& domain() const noexcept { return domain_; }

 private:
  std::string domain_;
};

#define DEEPCSO_ERROR(Name, Domain)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(Domain, what) {}   \
  }

DEEPCSO_ERROR(ShapeError, "shape");
DEEPCSO_ERROR(InvalidArgument, "argument");
DEEPCSO_ERROR(InvalidState, "state");
DEEPCSO_ERROR(ConfigError, "config");
DEEPCSO_ERROR(IngestionError, "data");
DEEPCSO_ERROR(DegenerateError, "degenerate");
DEEPCSO_ERROR(EmptyDatasetError, "data");
DEEPCSO_ERROR(SplitError, "data");
DEEPCSO_ERROR(LagSelectionError, "data");
DEEPCSO_ERROR(UnsupportedVersion, "checkpoint");
DEEPCSO_ERROR(SingularSystemError, "baseline");
DEEPCSO_ERROR(HistoryError, "forecast");
DEEPCSO_ERROR(SchemaError, "schema");
DEEPCSO_ERROR(SearchError, "tuner");
DEEPCSO_ERROR(IoError, "io");

#undef DEEPCSO_ERROR

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error("checkpoint", what + " (at byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

}  // namespace deepcso
