#pragma once

// Independent alignment reference used as the oracle for the production
// aligner. Minimum edit totals come from a plain memoized recursion over the
// three edit moves; the counts decomposition follows the documented tie
// policy (match > sub > del > ins, resolved from the sequence ends) by
// recursive descent rather than table backtrace.

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "progres/wer.hpp"

namespace progres::testing {

class AlignmentReference {
 public:
  AlignmentReference(std::span<const std::string> ref, std::span<const std::string> hyp)
      : ref_(ref.begin(), ref.end()), hyp_(hyp.begin(), hyp.end()) {}

  int min_edits() { return min_edits(ref_.size(), hyp_.size()); }

  progres::EditCounts counts() {
    progres::EditCounts c = descend(ref_.size(), hyp_.size());
    c.ref_len = static_cast<int>(ref_.size());
    return c;
  }

 private:
  int min_edits(std::size_t i, std::size_t j) {
    if (i == 0) return static_cast<int>(j);
    if (j == 0) return static_cast<int>(i);
    const auto key = std::make_pair(i, j);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    int best = min_edits(i - 1, j - 1) + (ref_[i - 1] == hyp_[j - 1] ? 0 : 1);
    best = std::min(best, min_edits(i - 1, j) + 1);
    best = std::min(best, min_edits(i, j - 1) + 1);
    memo_[key] = best;
    return best;
  }

  progres::EditCounts descend(std::size_t i, std::size_t j) {
    progres::EditCounts c;
    while (i > 0 || j > 0) {
      const int here = min_edits(i, j);
      if (i > 0 && j > 0 && ref_[i - 1] == hyp_[j - 1] && min_edits(i - 1, j - 1) == here) {
        --i;
        --j;
      } else if (i > 0 && j > 0 && min_edits(i - 1, j - 1) + 1 == here) {
        ++c.subs;
        --i;
        --j;
      } else if (i > 0 && min_edits(i - 1, j) + 1 == here) {
        ++c.dels;
        --i;
      } else {
        ++c.ins;
        --j;
      }
    }
    return c;
  }

  std::vector<std::string> ref_;
  std::vector<std::string> hyp_;
  std::map<std::pair<std::size_t, std::size_t>, int> memo_;
};

}  // namespace progres::testing
