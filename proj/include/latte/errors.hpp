#pragma once

#include <stdexcept>
#include <string>

namespace latte {

// Error taxonomy shared by the whole library; the CLI maps these onto
// process exit codes (config 2, data 3, numeric 4).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };  // shapes disagree
struct DomainError : Error { using Error::Error; };     // value outside an op's domain
struct ContractError : Error { using Error::Error; };   // precondition violated
struct NumericError : Error { using Error::Error; };    // NaN/Inf or numeric breakdown
struct ParseError : Error { using Error::Error; };      // malformed input file
struct ConfigError : Error { using Error::Error; };     // bad or inconsistent configuration
struct DataError : Error { using Error::Error; };       // dataset unusable for the request

}  // namespace latte
