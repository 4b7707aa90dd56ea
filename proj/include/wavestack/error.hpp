#pragma once

#include <stdexcept>
#include <string>

namespace wavestack {

enum class ErrorKind {
    config,
    parse,
    schema,
    size,
    imputation,
    structure,
    shape,
    domain,
    divergence,
    dependency,
    io,
};

const char* to_string(ErrorKind kind);

/// Base of every error raised by the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);
    ErrorKind kind() const noexcept { return kind_; }
    /// The message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

#define WAVESTACK_DEFINE_ERROR(Name, Kind)                                     \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& message) : Error(ErrorKind::Kind, message) {} \
    }

WAVESTACK_DEFINE_ERROR(ConfigError, config);
WAVESTACK_DEFINE_ERROR(ParseError, parse);
WAVESTACK_DEFINE_ERROR(SchemaError, schema);
WAVESTACK_DEFINE_ERROR(SizeError, size);
WAVESTACK_DEFINE_ERROR(ImputationError, imputation);
WAVESTACK_DEFINE_ERROR(StructureError, structure);
WAVESTACK_DEFINE_ERROR(ShapeError, shape);
WAVESTACK_DEFINE_ERROR(DomainError, domain);
WAVESTACK_DEFINE_ERROR(DivergenceError, divergence);
WAVESTACK_DEFINE_ERROR(DependencyError, dependency);
WAVESTACK_DEFINE_ERROR(IoError, io);

#undef WAVESTACK_DEFINE_ERROR

/// Throws the subclass matching `kind`.
[[noreturn]] void throw_error(ErrorKind kind, const std::string& message);

/// Process exit code for an error kind: 2 config, 3 data, 4 training divergence.
int exit_code(ErrorKind kind);

}  // namespace wavestack
