#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace caesar {

enum class TemplateId {
    ThinkInsights,
    ActMetaStrategy,
    ActLinkSelect,
    RoleGeneration,
    QueryExpansion,
    QaAnswer,
    QaFollowup,
    DraftGeneration,
    RefineQuery,
    MergeDrafts,
    Eli5Constrained,
    Eli5Unconstrained,
    JudgeRubric,
};

enum class Phase { Explore, Synthesis, Judge };

const char* to_string(TemplateId id);
std::optional<TemplateId> template_from_string(std::string_view name);
const std::vector<TemplateId>& all_templates();

Phase phase_of(TemplateId id);

// Placeholders are written `{name}` (binding required) or `{name|fallback}`
// (binding optional; the fallback text is inserted when it is absent or empty).
struct Placeholder {
    std::string name;
    std::optional<std::string> fallback;
};

std::string_view template_body(TemplateId id);
std::vector<Placeholder> placeholders(TemplateId id);

using Bindings = std::map<std::string, std::string>;

// Substitutes bindings verbatim in a single pass. Throws Error{MissingBinding}
// naming the first required placeholder without a binding.
std::string render(TemplateId id, const Bindings& bindings);
std::string render_body(std::string_view body, const Bindings& bindings);

}  // namespace caesar
