#pragma once

// Correction-prompt construction and structured-output extraction.

#include <optional>
#include <string>
#include <string_view>

#include "progres/nbest.hpp"

namespace progres {

enum class PromptTemplate { primary, alternate };

std::string_view to_string(PromptTemplate t);
PromptTemplate prompt_template_from_string(std::string_view s);

// Raw template text; the "[ASR n-best]" placeholder is replaced by the
// numbered hypothesis lines.
std::string_view prompt_template_text(PromptTemplate t);

// Renders the template with the list's ASR hypotheses, one per line in rank
// order, prefixed "1. ", "2. ", ... Prompt additions are never included.
std::string build_prompt(const NBestList& list, PromptTemplate t);

// Content of the single well-formed <...> span, trimmed. Absent when the
// reply contains zero or multiple spans, or the span trims to nothing. The
// returned text never contains '<' or '>'.
std::optional<std::string> extract_bracketed(std::string_view raw);

}  // namespace progres
