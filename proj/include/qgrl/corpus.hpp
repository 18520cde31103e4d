#pragma once

#include <optional>

#include "qgrl/common.hpp"

namespace qgrl {

struct Span {
  int start = 0;
  int end = 0;  // inclusive
  bool operator==(const Span&) const = default;
};

// One corpus record: a tokenized sentence with aligned POS/NER tags, an
// optional pivotal answer span, and zero or more gold questions. Tokens are
// lowercase throughout.
struct Example {
  std::string id;
  Tokens sentence;
  Tokens pos;
  Tokens ner;
  std::optional<Span> answer_span;
  std::vector<Tokens> questions;
};

// Checks the record invariants (tag lengths, span bounds, nonempty sentence
// and questions). `where` names the record in error messages.
void validate_example(const Example& ex, const std::string& where);

// JSON-lines corpus IO. Unknown keys are ignored on load; parse errors carry
// line numbers. An empty file is an empty corpus.
std::vector<Example> load_corpus(const std::string& path);
void save_corpus(const std::string& path, const std::vector<Example>& examples);

std::string example_to_json(const Example& ex);
Example example_from_json(const std::string& line, const std::string& where);

Tokens span_tokens(const Tokens& sentence, const Span& span);

// Heuristic tagger for raw (cased) text when no annotations are available:
// digits tag as CD/NUM, capitalized words as NNP/ENT, everything else NN/O.
// A crude stand-in for a real tagger; the synthetic corpus does not use it.
struct TaggedTokens {
  Tokens tokens;  // lowercased
  Tokens pos;
  Tokens ner;
  Tokens case_tags;
};
TaggedTokens heuristic_tags(const Tokens& raw_tokens);

}  // namespace qgrl
