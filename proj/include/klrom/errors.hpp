#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace klrom {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define KLROM_DEFINE_ERROR(Name)          \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

KLROM_DEFINE_ERROR(DomainError);
KLROM_DEFINE_ERROR(SingularGeometryError);
KLROM_DEFINE_ERROR(FullyTrimmedError);
KLROM_DEFINE_ERROR(InterfacePairingError);
KLROM_DEFINE_ERROR(GeometryConsistencyError);
KLROM_DEFINE_ERROR(ProjectionSpaceError);
KLROM_DEFINE_ERROR(AssemblyIntegrityError);
KLROM_DEFINE_ERROR(SingularSystemError);
KLROM_DEFINE_ERROR(ContractError);
KLROM_DEFINE_ERROR(EmptyBasisError);
KLROM_DEFINE_ERROR(DegenerateModeError);
KLROM_DEFINE_ERROR(IllPosedInterpolationError);
KLROM_DEFINE_ERROR(ReducedSolveError);
KLROM_DEFINE_ERROR(UndefinedRelativeError);
KLROM_DEFINE_ERROR(InfeasibleError);
KLROM_DEFINE_ERROR(ArtifactError);

#undef KLROM_DEFINE_ERROR

/// Configuration problems; carries every issue found, each prefixed with its JSON path.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}
  explicit ConfigError(const std::string& issue) : ConfigError(std::vector<std::string>{issue}) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "invalid configuration";
    for (const auto& s : issues) out += "\n  " + s;
    return out;
  }
  std::vector<std::string> issues_;
};

}  // namespace klrom
