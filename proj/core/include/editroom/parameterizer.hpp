#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "editroom/command.hpp"
#include "editroom/error.hpp"
#include "editroom/llm.hpp"
#include "editroom/scene.hpp"

namespace editroom {

enum class PlanBackend { Llm, Rules };

std::string_view to_string(PlanBackend b);
/// "llm" or "rules". Throws ValidationError.
PlanBackend plan_backend_from_string(std::string_view name);

struct BreakdownPlan {
  std::vector<EditCommand> commands;
  std::string raw_response;
  PlanBackend backend = PlanBackend::Rules;
  /// Lines that looked like commands but did not parse.
  std::vector<std::string> warnings;
};

class PlanError : public Error {
public:
  enum class Kind { NoValidCommands, Unparseable };

  PlanError(Kind kind, std::string message, std::string text, std::optional<std::size_t> step = std::nullopt)
      : Error(std::move(message)), kind_(kind), text_(std::move(text)), step_(step) {}

  Kind kind() const noexcept { return kind_; }
  /// The offending input.
  const std::string& text() const noexcept { return text_; }
  /// Zero-based clause index for Unparseable.
  std::optional<std::size_t> step() const noexcept { return step_; }

private:
  Kind kind_;
  std::string text_;
  std::optional<std::size_t> step_;
};

const char* to_string(PlanError::Kind kind) noexcept;

/// The six accepted output formats, one per line.
const std::vector<std::string>& breakdown_formats();

/// Scene attributes (category, position, half-extents, yaw in degrees,
/// caption), the command, and the output formats. Deterministic.
std::string build_prompt(const Scene& scene, std::string_view natural_command, const ObjectCatalog& catalog);

/// Template lines in reply order. List markers, backticks and a trailing period
/// are stripped; prose is skipped. Throws PlanError(NoValidCommands).
std::vector<EditCommand> parse_llm_response(std::string_view text, std::vector<std::string>* warnings = nullptr);

/// Pattern grammar over single-operation clauses joined by "and" / "then".
/// Throws PlanError(Unparseable) naming the first clause it cannot read.
BreakdownPlan plan_with_rules(const Scene& scene, std::string_view natural_command, const ObjectCatalog& catalog);

/// Throws LlmError on transport failures and PlanError on unusable replies.
BreakdownPlan plan_with_llm(const Scene& scene, std::string_view natural_command, const ObjectCatalog& catalog,
                            LlmClient& client);

/// Dispatches on `backend`; llm mode without a client throws ValidationError.
BreakdownPlan parameterize(const Scene& scene, std::string_view natural_command, PlanBackend backend,
                           const ObjectCatalog& catalog, LlmClient* client = nullptr);

}  // namespace editroom
