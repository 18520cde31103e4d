#include "qgrl/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace qgrl {

Vocabulary::Vocabulary() {
  id_to_token_ = {"<pad>", "<s>", "</s>", "<unk>"};
  for (size_t i = 0; i < id_to_token_.size(); ++i)
    token_to_id_[id_to_token_[i]] = static_cast<int>(i);
}

Vocabulary Vocabulary::build(const std::vector<Example>& examples, size_t cap) {
  if (cap < 4) throw ArgError("vocabulary cap must be at least 4");
  std::map<std::string, long> counts;
  for (const auto& ex : examples) {
    for (const auto& t : ex.sentence) counts[t] += 1;
    for (const auto& q : ex.questions)
      for (const auto& t : q) counts[t] += 1;
  }
  Vocabulary v;
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  size_t room = cap - v.id_to_token_.size();
  for (const auto& [tok, cnt] : ranked) {
    if (v.id_to_token_.size() - 4 >= room) break;
    if (v.token_to_id_.count(tok)) continue;  // a special occurred in text
    v.token_to_id_[tok] = static_cast<int>(v.id_to_token_.size());
    v.id_to_token_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& id_to_token) {
  if (id_to_token.size() < 4 || id_to_token[0] != "<pad>" ||
      id_to_token[1] != "<s>" || id_to_token[2] != "</s>" ||
      id_to_token[3] != "<unk>")
    throw FormatError("vocabulary list must begin with the four reserved tokens");
  Vocabulary v;
  v.id_to_token_ = id_to_token;
  v.token_to_id_.clear();
  for (size_t i = 0; i < id_to_token.size(); ++i) {
    auto [it, fresh] = v.token_to_id_.emplace(id_to_token[i], static_cast<int>(i));
    if (!fresh) throw FormatError("duplicate token in vocabulary list: " + id_to_token[i]);
  }
  return v;
}

int Vocabulary::encode(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::decode(int id) const {
  if (id < 0 || id >= size())
    throw ArgError("token id " + std::to_string(id) + " out of range [0, " +
                   std::to_string(size()) + ")");
  return id_to_token_[static_cast<size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.count(token) > 0;
}

namespace {

std::vector<std::string> with_o_first(std::set<std::string> tags) {
  tags.erase("O");
  std::vector<std::string> out = {"O"};
  out.insert(out.end(), tags.begin(), tags.end());
  return out;
}

}  // namespace

FeatureVocab::FeatureVocab() {
  pos_ = {"O"};
  ner_ = {"O"};
  case_ = {"O", "NUM", "UP", "OTHER"};
  answer_ = {"O", "B", "I"};
  pos_ids_["O"] = 0;
  ner_ids_["O"] = 0;
}

FeatureVocab FeatureVocab::build(const std::vector<Example>& examples) {
  std::set<std::string> pos, ner;
  for (const auto& ex : examples) {
    pos.insert(ex.pos.begin(), ex.pos.end());
    ner.insert(ex.ner.begin(), ex.ner.end());
  }
  return from_lists(with_o_first(std::move(pos)), with_o_first(std::move(ner)));
}

FeatureVocab FeatureVocab::from_lists(const std::vector<std::string>& pos,
                                      const std::vector<std::string>& ner) {
  if (pos.empty() || pos[0] != "O" || ner.empty() || ner[0] != "O")
    throw FormatError("tag lists must begin with O");
  FeatureVocab fv;
  fv.pos_ = pos;
  fv.ner_ = ner;
  fv.pos_ids_.clear();
  fv.ner_ids_.clear();
  for (size_t i = 0; i < pos.size(); ++i) {
    auto [it, fresh] = fv.pos_ids_.emplace(pos[i], static_cast<int>(i));
    if (!fresh) throw FormatError("duplicate tag: " + pos[i]);
  }
  for (size_t i = 0; i < ner.size(); ++i) {
    auto [it, fresh] = fv.ner_ids_.emplace(ner[i], static_cast<int>(i));
    if (!fresh) throw FormatError("duplicate tag: " + ner[i]);
  }
  return fv;
}

int FeatureVocab::pos_id(const std::string& tag) const {
  auto it = pos_ids_.find(tag);
  return it == pos_ids_.end() ? 0 : it->second;
}

int FeatureVocab::ner_id(const std::string& tag) const {
  auto it = ner_ids_.find(tag);
  return it == ner_ids_.end() ? 0 : it->second;
}

int FeatureVocab::case_id(const std::string& tag) const {
  for (size_t i = 0; i < case_.size(); ++i)
    if (case_[i] == tag) return static_cast<int>(i);
  return 0;
}

int FeatureVocab::answer_id(const std::string& tag) const {
  for (size_t i = 0; i < answer_.size(); ++i)
    if (answer_[i] == tag) return static_cast<int>(i);
  return 0;
}

std::string case_tag_of(const std::string& token) {
  if (token.empty()) return "OTHER";
  bool all_digit = true, all_alpha = true;
  for (unsigned char c : token) {
    if (!std::isdigit(c)) all_digit = false;
    if (!std::isalpha(c)) all_alpha = false;
  }
  if (all_digit) return "NUM";
  if (all_alpha) return "O";
  return "OTHER";
}

Tokens answer_position_tags(int length, const std::optional<Span>& span) {
  if (length < 0) throw ArgError("negative sentence length");
  Tokens tags(static_cast<size_t>(length), "O");
  if (!span) return tags;
  if (span->start < 0 || span->end < span->start || span->end >= length)
    throw ValidationError("answer span [" + std::to_string(span->start) + ", " +
                          std::to_string(span->end) +
                          "] out of bounds for length " + std::to_string(length));
  tags[static_cast<size_t>(span->start)] = "B";
  for (int i = span->start + 1; i <= span->end; ++i)
    tags[static_cast<size_t>(i)] = "I";
  return tags;
}

std::vector<int> encode_tokens(const Vocabulary& vocab, const Tokens& toks) {
  std::vector<int> ids;
  ids.reserve(toks.size());
  for (const auto& t : toks) ids.push_back(vocab.encode(t));
  return ids;
}

}  // namespace qgrl
