#ifndef BPMF_CLI_HPP
#define BPMF_CLI_HPP

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bpmf/io.hpp"
#include "bpmf/model.hpp"

namespace bpmf::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kInvalidConfig = 2, kRefuted = 3 };

inline constexpr int kSchemaVersion = 1;

inline const std::vector<std::string> kCommands{"simulate", "ode",    "equilibria", "lln",
                                                "clt",      "ergodicity", "oracle", "plotdata"};

/// A problem with the configuration, located by dot path (e.g. "model.birth[1]").
struct ConfigIssue {
  std::string path;
  std::string kind;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

using ModelSpec = std::variant<ModelParams, SymmetricParams>;

/// Applies "a.b.c=VALUE". VALUE is parsed as JSON when possible, otherwise
/// taken as a string. Missing intermediate objects are created.
void apply_override(Json& document, std::string_view assignment);

/// Reads the configuration file and applies overrides in order.
Json load_document(const std::filesystem::path& path, const std::vector<std::string>& overrides);

/// Checks schema_version, rejects unknown keys anywhere in the document and
/// parses the model block. Throws ConfigError.
ModelSpec parse_model(const Json& document);

/// Validated model for a spec; ValidationIssue lists become ConfigErrors.
ValidatedModel validate_spec(const ModelSpec& spec);

/// Runs one subcommand, writing report files under `out_dir`. Diagnostics
/// (including the machine-readable error list on exit 2) go to `diag`.
int run(std::string_view command, const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
        const std::vector<std::string>& overrides, std::ostream& diag);

/// Command-line entry point.
int main(int argc, char** argv);

}  // namespace bpmf::cli

#endif  // BPMF_CLI_HPP
