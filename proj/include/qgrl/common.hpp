#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qgrl {

using Tokens = std::vector<std::string>;

// Error taxonomy. Everything user-facing derives from Error so the CLI can
// catch a single type at the top level and map it to a nonzero exit.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimError : Error { using Error::Error; };         // operand shape mismatch
struct ArgError : Error { using Error::Error; };         // bad argument value
struct ConfigError : Error { using Error::Error; };      // bad or missing configuration
struct NumericError : Error { using Error::Error; };     // NaN/Inf where finite required
struct ParseError : Error { using Error::Error; };       // malformed input file
struct ValidationError : Error { using Error::Error; };  // well-formed but inconsistent record
struct FormatError : Error { using Error::Error; };      // unrecognized container magic/version
struct IntegrityError : Error { using Error::Error; };   // truncated or corrupted container
struct IoError : Error { using Error::Error; };
struct PredictorError : Error { using Error::Error; };   // answer-predictor protocol failure

std::string join(const Tokens& toks, const std::string& sep = " ");

}  // namespace qgrl
