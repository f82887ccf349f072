#pragma once

#include <stdexcept>
#include <string>

namespace epskit {

enum class ErrorKind { Config, Domain, Io };

/// Reason codes for domain failures. Tests and the CLI switch on these
/// rather than on message text.
enum class DomainReason {
  Generic,
  OutOfValidity,
  NoThermalModel,
  NotPhaseMatched,
  GroupVelocityMatched,
  TotalInternalReflection,
  CannotCompensate,
  Uncompensatable,
  Geometry,
  UndefinedEstimate,
  NoRecords,
  UnknownMaterial,
};

// Base of every error the toolkit throws. The message is prefixed with
// the originating module ("materials: ...").
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &module, const std::string &what)
      : std::runtime_error(module + ": " + what), kind_(kind), module_(module) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string &module() const noexcept { return module_; }

private:
  ErrorKind kind_;
  std::string module_;
};

class ConfigError : public Error {
public:
  ConfigError(const std::string &module, const std::string &what)
      : Error(ErrorKind::Config, module, what) {}
};

class DomainError : public Error {
public:
  DomainError(const std::string &module, DomainReason reason, const std::string &what)
      : Error(ErrorKind::Domain, module, what), reason_(reason) {}

  DomainReason reason() const noexcept { return reason_; }

private:
  DomainReason reason_;
};

class IoError : public Error {
public:
  IoError(const std::string &module, const std::string &what)
      : Error(ErrorKind::Io, module, what) {}
};

} // namespace epskit
