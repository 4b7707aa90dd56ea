#include "wavestack/error.hpp"

namespace wavestack {

const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::config: return "configuration error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::schema: return "schema error";
    case ErrorKind::size: return "size error";
    case ErrorKind::imputation: return "imputation error";
    case ErrorKind::structure: return "structure error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::divergence: return "divergence error";
    case ErrorKind::dependency: return "dependency error";
    case ErrorKind::io: return "io error";
    }
    return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message)
{
}

void throw_error(ErrorKind kind, const std::string& message)
{
    switch (kind) {
    case ErrorKind::config: throw ConfigError(message);
    case ErrorKind::parse: throw ParseError(message);
    case ErrorKind::schema: throw SchemaError(message);
    case ErrorKind::size: throw SizeError(message);
    case ErrorKind::imputation: throw ImputationError(message);
    case ErrorKind::structure: throw StructureError(message);
    case ErrorKind::shape: throw ShapeError(message);
    case ErrorKind::domain: throw DomainError(message);
    case ErrorKind::divergence: throw DivergenceError(message);
    case ErrorKind::dependency: throw DependencyError(message);
    case ErrorKind::io: throw IoError(message);
    }
    throw Error(kind, message);
}

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::config:
    case ErrorKind::shape:
        return 2;
    case ErrorKind::divergence:
        return 4;
    default:
        return 3;
    }
}

}  // namespace wavestack
