#include "progres/prompts.hpp"

#include <cctype>
#include <stdexcept>

namespace progres {

namespace {

constexpr std::string_view kPlaceholder = "[ASR n-best]";

constexpr std::string_view kPrimaryTemplate =
    "Perform error correction on the top outputs generated by an ASR system. "
    "The ASR hypotheses, listed in order of their ASR posterior score, are as follows:\n"
    "[ASR n-best]\n"
    "Please provide the corrected ASR transcription of the given utterance only, "
    "surrounding it with < >. Do not add any explanations or commentary.";

constexpr std::string_view kAlternateTemplate =
    "Below are hypotheses for the transcription of a natural language sentence "
    "produced by an automatic speech recognizer. Please return only the sentence "
    "you believe is the most plausible transcription, surrounding the sentence "
    "with <>. Reminder that spelling of names may be different, as well as words "
    "used, as the hypotheses are phonetically estimated, so please return a "
    "sentence that is NOT in the hypotheses. Please provide the most likely based "
    "on information you have about plausible sentences from these n-best:\n"
    "[ASR n-best]";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(PromptTemplate t) {
  return t == PromptTemplate::primary ? "primary" : "alternate";
}

PromptTemplate prompt_template_from_string(std::string_view s) {
  if (s == "primary") return PromptTemplate::primary;
  if (s == "alternate") return PromptTemplate::alternate;
  throw std::invalid_argument("unknown prompt template \"" + std::string(s) + "\"");
}

std::string_view prompt_template_text(PromptTemplate t) {
  return t == PromptTemplate::primary ? kPrimaryTemplate : kAlternateTemplate;
}

std::string build_prompt(const NBestList& list, PromptTemplate t) {
  std::string numbered;
  int n = 0;
  for (const auto& h : list.hyps) {
    if (h.source != HypSource::asr) continue;
    if (n > 0) numbered += '\n';
    ++n;
    numbered += std::to_string(n);
    numbered += ". ";
    numbered += h.text;
  }
  if (n == 0) throw std::invalid_argument("build_prompt: list has no ASR hypotheses");

  const std::string_view tmpl = prompt_template_text(t);
  const auto pos = tmpl.find(kPlaceholder);
  std::string prompt;
  prompt.reserve(tmpl.size() + numbered.size());
  prompt.append(tmpl.substr(0, pos));
  prompt.append(numbered);
  prompt.append(tmpl.substr(pos + kPlaceholder.size()));
  return prompt;
}

std::optional<std::string> extract_bracketed(std::string_view raw) {
  // Spans are bracket-free runs delimited by '<' and '>'. Exactly one such
  // span must exist and it must trim to non-empty content.
  std::optional<std::string_view> span;
  std::size_t count = 0;
  std::size_t open = std::string_view::npos;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if (c == '<') {
      open = i;  // a later '<' restarts the span
    } else if (c == '>') {
      if (open != std::string_view::npos) {
        ++count;
        span = raw.substr(open + 1, i - open - 1);
        open = std::string_view::npos;
      }
    }
  }
  if (count != 1) return std::nullopt;
  const auto content = trim(*span);
  if (content.empty()) return std::nullopt;
  return std::string(content);
}

}  // namespace progres
