#pragma once

// Hand-written fixture utterances shared across suites.

#include <string>
#include <vector>

#include "progres/nbest.hpp"

namespace progres::testing {

// Place-name utterance: the ASR systematically garbles two rare names; the
// corrected sentence matches the reference exactly.
inline constexpr const char* kPlacenameReference =
    "it is distributed throughout the southern philippines wallacea and new guinea";
inline constexpr const char* kPlacenameCorrection =
    "it is distributed throughout the southern philippines wallacea and new guinea";

inline progres::NBestList placename_utterance() {
  const std::vector<std::pair<std::string, double>> hyps = {
      {"it is distributed throughout the southern philippines walaca and new guina", -2.1},
      {"it is distributed throughout the southern pilippines walaca and new guina", -2.5},
      {"it is distributed throughout the southern philippines valaca and new guina", -3.0},
      {"it is distributed throughout the southern pilippines valaca and new guina", -3.4},
      {"it is distributed throughout the southern philippines walaka and new guina", -3.9},
  };
  progres::NBestList utt;
  utt.utt_id = "placename";
  utt.reference = kPlacenameReference;
  int rank = 0;
  for (const auto& [text, score] : hyps) {
    progres::Hypothesis h;
    h.text = text;
    h.asr_score = score;
    h.source = progres::HypSource::asr;
    h.asr_rank = ++rank;
    utt.hyps.push_back(std::move(h));
  }
  return utt;
}

// Zoo utterance: the best available hypothesis differs sharply from the
// rank-1 output; reference has 7 words, the rank-1 hypothesis has 4 edits.
inline constexpr const char* kZooReference = "my niece wants tickets to the zoo";
inline constexpr const char* kZooRank1 = "my knee wants to zoom";
inline constexpr const char* kZooCorrection = "my niece wants tickets to zoo";

inline progres::NBestList zoo_utterance() {
  const std::vector<std::string> texts = {
      "my knee wants to zoom",
      "my knee wants to zoe",
      "my knee's wants to zoom",
      "my knee's wants to zoe",
      "my knee's wants tickets to zoom",
      "my knee's wants tickets to zoe",
      "my knee's wants to zoom and",
  };
  progres::NBestList utt;
  utt.utt_id = "zoo";
  utt.reference = kZooReference;
  double score = -1.0;
  int rank = 0;
  for (const auto& text : texts) {
    progres::Hypothesis h;
    h.text = text;
    h.asr_score = score;
    h.source = progres::HypSource::asr;
    h.asr_rank = ++rank;
    utt.hyps.push_back(std::move(h));
    score -= 0.5;
  }
  return utt;
}

}  // namespace progres::testing
