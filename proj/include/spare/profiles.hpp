#pragma once

#include <string>
#include <vector>

namespace spare {

struct ErrorCategory {
  std::string name;         // wire form, e.g. "NO STEP MATCH"
  std::string description;  // one-line definition shown in the guidelines
};

// Per-dataset conventions: how to pull a final answer out of a solution,
// how to normalize answers before comparison, which error categories the
// judge may assign, and which metrics the eval stage reports.
struct DatasetProfile {
  std::string name;
  std::string answer_marker;  // phrase introducing the final answer
  std::vector<std::string> normalizers;  // ordered pipeline, see normalize_answer
  std::vector<ErrorCategory> error_categories;
  std::vector<std::string> metrics;  // subset of {exact_match, answer_f1, macro_f1}
  std::string step_split_pattern;    // empty = newline split
  std::string generation_guidelines; // system prompt for sampling solutions

  bool has_error_category(const std::string& name) const;
};

// Built-in registry. Throws ConfigError for unknown names.
const DatasetProfile& get_profile(const std::string& name);
std::vector<std::string> profile_names();

}  // namespace spare
