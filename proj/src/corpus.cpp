#include "qgrl/corpus.hpp"

#include <cctype>
#include <fstream>

#include <json.hpp>

namespace qgrl {

using nlohmann::json;

void validate_example(const Example& ex, const std::string& where) {
  if (ex.sentence.empty())
    throw ValidationError(where + ": empty sentence");
  if (ex.pos.size() != ex.sentence.size())
    throw ValidationError(where + ": pos length " + std::to_string(ex.pos.size()) +
                          " does not match sentence length " +
                          std::to_string(ex.sentence.size()));
  if (ex.ner.size() != ex.sentence.size())
    throw ValidationError(where + ": ner length " + std::to_string(ex.ner.size()) +
                          " does not match sentence length " +
                          std::to_string(ex.sentence.size()));
  if (ex.answer_span) {
    const Span& s = *ex.answer_span;
    if (s.start < 0 || s.start > s.end ||
        s.end >= static_cast<int>(ex.sentence.size()))
      throw ValidationError(where + ": answer_span [" + std::to_string(s.start) +
                            ", " + std::to_string(s.end) +
                            "] out of bounds for sentence length " +
                            std::to_string(ex.sentence.size()));
  }
  for (size_t i = 0; i < ex.questions.size(); ++i)
    if (ex.questions[i].empty())
      throw ValidationError(where + ": questions[" + std::to_string(i) +
                            "] is empty");
}

static Tokens to_tokens(const json& j, const std::string& where,
                        const std::string& field) {
  if (!j.is_array())
    throw ValidationError(where + ": " + field + " must be an array");
  Tokens out;
  for (const auto& t : j) {
    if (!t.is_string())
      throw ValidationError(where + ": " + field + " must hold strings");
    out.push_back(t.get<std::string>());
  }
  return out;
}

Example example_from_json(const std::string& line, const std::string& where) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(where + ": " + e.what());
  }
  if (!j.is_object()) throw ValidationError(where + ": record is not an object");
  Example ex;
  if (!j.contains("id") || !j["id"].is_string())
    throw ValidationError(where + ": missing string field id");
  ex.id = j["id"].get<std::string>();
  if (!j.contains("sentence"))
    throw ValidationError(where + ": missing field sentence");
  ex.sentence = to_tokens(j["sentence"], where, "sentence");
  if (!j.contains("pos")) throw ValidationError(where + ": missing field pos");
  ex.pos = to_tokens(j["pos"], where, "pos");
  if (!j.contains("ner")) throw ValidationError(where + ": missing field ner");
  ex.ner = to_tokens(j["ner"], where, "ner");
  if (j.contains("answer_span") && !j["answer_span"].is_null()) {
    const json& s = j["answer_span"];
    if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() ||
        !s[1].is_number_integer())
      throw ValidationError(where + ": answer_span must be [start, end]");
    ex.answer_span = Span{s[0].get<int>(), s[1].get<int>()};
  }
  if (j.contains("questions")) {
    if (!j["questions"].is_array())
      throw ValidationError(where + ": questions must be an array");
    for (const auto& q : j["questions"])
      ex.questions.push_back(to_tokens(q, where, "questions"));
  }
  validate_example(ex, where);
  return ex;
}

std::string example_to_json(const Example& ex) {
  json j;
  j["id"] = ex.id;
  j["sentence"] = ex.sentence;
  j["pos"] = ex.pos;
  j["ner"] = ex.ner;
  if (ex.answer_span)
    j["answer_span"] = {ex.answer_span->start, ex.answer_span->end};
  else
    j["answer_span"] = nullptr;
  j["questions"] = ex.questions;
  return j.dump();
}

std::vector<Example> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  std::vector<Example> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(
        example_from_json(line, path + ":" + std::to_string(line_no)));
  }
  return out;
}

void save_corpus(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file: " + path);
  for (const Example& ex : examples) out << example_to_json(ex) << "\n";
  if (!out) throw IoError("short write to corpus file: " + path);
}

Tokens span_tokens(const Tokens& sentence, const Span& span) {
  if (span.start < 0 || span.start > span.end ||
      span.end >= static_cast<int>(sentence.size()))
    throw ArgError("span out of bounds");
  return Tokens(sentence.begin() + span.start, sentence.begin() + span.end + 1);
}

TaggedTokens heuristic_tags(const Tokens& raw_tokens) {
  TaggedTokens out;
  for (const std::string& raw : raw_tokens) {
    bool has_alpha = false, has_digit = false, has_upper = false, all_digit = true;
    for (unsigned char c : raw) {
      if (std::isalpha(c)) has_alpha = true;
      if (std::isdigit(c)) has_digit = true; else all_digit = false;
      if (std::isupper(c)) has_upper = true;
    }
    std::string lower;
    for (unsigned char c : raw) lower += static_cast<char>(std::tolower(c));
    out.tokens.push_back(lower);
    if (has_digit && all_digit) {
      out.pos.push_back("CD");
      out.ner.push_back("NUM");
      out.case_tags.push_back("NUM");
    } else if (has_upper) {
      out.pos.push_back("NNP");
      out.ner.push_back("ENT");
      out.case_tags.push_back("UP");
    } else if (has_alpha) {
      out.pos.push_back("NN");
      out.ner.push_back("O");
      out.case_tags.push_back("O");
    } else {
      out.pos.push_back(".");
      out.ner.push_back("O");
      out.case_tags.push_back("OTHER");
    }
  }
  return out;
}

}  // namespace qgrl
