#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cqsim/generator.hpp"

namespace cqsim::cli {

/// Exit codes: 0 success, 1 validation error, 2 runtime failure.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses a `generate` command line (program name excluded) and returns the
/// effective configuration without touching any dataset. Throws on bad input.
GenerationConfig generation_config_from_args(const std::vector<std::string>& args);

/// Config-file text equivalent to a parsed command line (program name
/// excluded), every option of the chosen subcommand included.
std::string config_text_from_args(const std::vector<std::string>& args);

}  // namespace cqsim::cli
