#include "spare/profiles.hpp"

#include <algorithm>
#include <map>

#include "spare/errors.hpp"

namespace spare {

bool DatasetProfile::has_error_category(const std::string& name) const {
  return std::any_of(error_categories.begin(), error_categories.end(),
                     [&](const ErrorCategory& c) { return c.name == name; });
}

namespace {

const ErrorCategory kComprehension{
    "COMPREHENSION", "a concept is misunderstood or misapplied"};
const ErrorCategory kNumeric{"NUMERIC", "numeric values do not match"};
const ErrorCategory kCalculation{"CALCULATION", "a computation is carried out incorrectly"};
const ErrorCategory kTransformation{
    "TRANSFORMATION",
    "an algebraic or trigonometric rearrangement or substitution is incorrect"};
const ErrorCategory kPropagation{
    "PROPAGATION", "an error is carried forward directly from a previous step"};
const ErrorCategory kRestatement{
    "RESTATEMENT", "a restatement of earlier steps or question sentences is wrong"};
const ErrorCategory kNoStepMatch{
    "NO STEP MATCH",
    "the step matches no reference step and cannot be inferred from the question"};
const ErrorCategory kDocumentName{
    "DOCUMENT NAME", "the document name in the step does not match or does not exist"};
const ErrorCategory kEntityName{
    "ENTITY NAME", "the entity name in the step does not match or does not exist"};
const ErrorCategory kIntendedCategory{
    "INTENDED CATEGORY",
    "the kind of answer differs from what is required, e.g. a country where a date is needed"};
const ErrorCategory kSemanticRelation{
    "SEMANTIC RELATION",
    "the relation between entities does not hold when compared semantically"};
const ErrorCategory kIncorrectRelation{
    "INCORRECT RELATION", "the reported spatial relation does not match or does not exist"};

const char* kMathGeneration =
    "Solve the problem step by step, one step per line. Finish with a line of "
    "the form \"Hence, the answer is <answer>.\"";

std::map<std::string, DatasetProfile> build_registry() {
  std::map<std::string, DatasetProfile> reg;

  DatasetProfile gsm8k;
  gsm8k.name = "gsm8k";
  gsm8k.answer_marker = "the answer is";
  gsm8k.normalizers = {"trim", "casefold", "strip_markup", "strip_separators"};
  gsm8k.error_categories = {kComprehension, kNumeric, kCalculation, kNoStepMatch};
  gsm8k.metrics = {"exact_match"};
  gsm8k.generation_guidelines = kMathGeneration;
  reg[gsm8k.name] = gsm8k;

  DatasetProfile math;
  math.name = "math";
  math.answer_marker = "the answer is";
  math.normalizers = {"trim", "casefold", "strip_markup", "strip_separators",
                      "canonical_fraction"};
  math.error_categories = {kComprehension, kNumeric,     kCalculation,
                           kTransformation, kPropagation, kRestatement,
                           kNoStepMatch};
  math.metrics = {"exact_match"};
  math.generation_guidelines = kMathGeneration;
  reg[math.name] = math;

  DatasetProfile musique;
  musique.name = "musique";
  musique.answer_marker = "the answer is";
  musique.normalizers = {"trim", "casefold", "strip_punctuation",
                         "collapse_whitespace"};
  musique.error_categories = {kDocumentName,    kEntityName,
                              kNumeric,          kIntendedCategory,
                              kSemanticRelation, kNoStepMatch};
  musique.metrics = {"exact_match", "answer_f1"};
  musique.generation_guidelines =
      "Answer the multi-hop question step by step, one retrieval or reasoning "
      "step per line. Finish with a line of the form \"Hence, the answer is "
      "<answer>.\"";
  reg[musique.name] = musique;

  DatasetProfile sparp;
  sparp.name = "sparp";
  sparp.answer_marker = "the answer is";
  sparp.normalizers = {"trim", "casefold", "collapse_whitespace"};
  sparp.error_categories = {kEntityName, kIncorrectRelation, kNoStepMatch};
  sparp.metrics = {"exact_match", "macro_f1"};
  sparp.generation_guidelines =
      "Work out the spatial relations step by step, one composition per line. "
      "Finish with a line of the form \"Hence, the answer is <answer>.\"";
  reg[sparp.name] = sparp;

  return reg;
}

const std::map<std::string, DatasetProfile>& registry() {
  static const std::map<std::string, DatasetProfile> reg = build_registry();
  return reg;
}

}  // namespace

const DatasetProfile& get_profile(const std::string& name) {
  const auto& reg = registry();
  auto it = reg.find(name);
  if (it == reg.end()) {
    throw ConfigError({"unknown dataset profile '" + name + "'"});
  }
  return it->second;
}

std::vector<std::string> profile_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : registry()) names.push_back(name);
  return names;
}

}  // namespace spare
