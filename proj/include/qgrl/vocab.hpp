#pragma once

#include <map>

#include "qgrl/corpus.hpp"

namespace qgrl {

// Token vocabulary with four reserved ids. Built from corpus frequency
// (sentences and questions), most frequent first, ties broken by token order.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kStart = 1;
  static constexpr int kEnd = 2;
  static constexpr int kUnk = 3;

  Vocabulary();
  static Vocabulary build(const std::vector<Example>& examples, size_t cap);
  static Vocabulary from_tokens(const std::vector<std::string>& id_to_token);

  int encode(const std::string& token) const;  // kUnk when absent
  const std::string& decode(int id) const;
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::map<std::string, int> token_to_id_;
};

// Closed tag sets for the categorical input features. POS and NER sets are
// collected from the corpus with "O" always present and serving as the
// fallback for unseen tags; case and answer-position sets are fixed.
class FeatureVocab {
 public:
  FeatureVocab();
  static FeatureVocab build(const std::vector<Example>& examples);
  static FeatureVocab from_lists(const std::vector<std::string>& pos,
                                 const std::vector<std::string>& ner);

  int pos_id(const std::string& tag) const;
  int ner_id(const std::string& tag) const;
  int case_id(const std::string& tag) const;
  int answer_id(const std::string& tag) const;

  const std::vector<std::string>& pos_tags() const { return pos_; }
  const std::vector<std::string>& ner_tags() const { return ner_; }
  const std::vector<std::string>& case_tags() const { return case_; }
  const std::vector<std::string>& answer_tags() const { return answer_; }

 private:
  std::vector<std::string> pos_, ner_, case_, answer_;
  std::map<std::string, int> pos_ids_, ner_ids_;
};

// Case feature of an already-lowercased token: NUM for digit strings, O for
// plain words, OTHER for punctuation and mixed strings. UP only appears via
// the heuristic tagger on raw text.
std::string case_tag_of(const std::string& token);

// B/I/O tags over a sentence of the given length; all O without a span.
Tokens answer_position_tags(int length, const std::optional<Span>& span);

std::vector<int> encode_tokens(const Vocabulary& vocab, const Tokens& toks);

}  // namespace qgrl
