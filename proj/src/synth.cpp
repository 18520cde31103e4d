#include "qgrl/synth.hpp"

#include <cstdio>

#include "qgrl/rng.hpp"

namespace qgrl {

namespace {

struct Template {
  // Slot markers: "@E" entity, "@P" person, "@Y" year.
  Tokens sentence, pos, ner;
  int answer_index;
  std::vector<Tokens> questions;
};

Tokens split_ws(const std::string& text) {
  Tokens out;
  std::string cur;
  for (char c : text) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<Template> make_templates() {
  std::vector<Template> ts;
  ts.push_back({split_ws("the grand museum in @E opened in @Y ."),
                split_ws("DT JJ NN IN NNP VBD IN CD ."),
                split_ws("O O O O LOC O O NUM O"),
                7,
                {split_ws("in what year did the grand museum in @E open ?"),
                 split_ws("when did the grand museum in @E open ?"),
                 split_ws("what year did the grand museum in @E open ?")}});
  ts.push_back({split_ws("@P founded the city of @E in @Y ."),
                split_ws("NNP VBD DT NN IN NNP IN CD ."),
                split_ws("PER O O O O LOC O NUM O"),
                7,
                {split_ws("in what year was the city of @E founded ?"),
                 split_ws("when was the city of @E founded ?"),
                 split_ws("who founded the city of @E ?")}});
  ts.push_back({split_ws("the great fire of @Y destroyed the harbor of @E ."),
                split_ws("DT JJ NN IN CD VBD DT NN IN NNP ."),
                split_ws("O O O O NUM O O O O LOC O"),
                4,
                {split_ws("in what year was the harbor of @E destroyed ?"),
                 split_ws("what year was the harbor of @E destroyed ?"),
                 split_ws("when was the harbor of @E destroyed ?")}});
  ts.push_back({split_ws("@E hosted the summer games in @Y ."),
                split_ws("NNP VBD DT NN NNS IN CD ."),
                split_ws("LOC O O O O O NUM O"),
                6,
                {split_ws("in what year were the summer games in @E ?"),
                 split_ws("when were the summer games in @E ?"),
                 split_ws("who hosted the summer games ?")}});
  ts.push_back({split_ws("the old bridge near @E was built in @Y by @P ."),
                split_ws("DT JJ NN IN NNP VBD VBN IN CD IN NNP ."),
                split_ws("O O O O LOC O O O NUM O PER O"),
                8,
                {split_ws("in what year was the old bridge near @E built ?"),
                 split_ws("when was the old bridge near @E built ?"),
                 split_ws("who built the old bridge near @E ?")}});
  return ts;
}

const std::vector<std::string> kEntities = {
    "arlington", "boston",   "calder",   "denton",    "elmsworth", "fairview",
    "georgetown", "harlow",  "irvine",   "jasper",    "kingsley",  "lakewood",
    "marlow",     "newton",  "oakdale",  "preston",   "quimby",    "ravenna",
    "stanton",    "trenton", "underhill", "vernon",   "westfield", "yardley"};

const std::vector<std::string> kPersons = {
    "abrams", "bennett", "cortez",  "dawson",  "ellery",  "foster",
    "grantham", "hobbes", "ingram", "jarvis",  "keating", "lowell",
    "mercer", "norwood", "osgood",  "pemberton"};

Tokens fill(const Tokens& pattern, const std::string& ent,
            const std::string& per, const std::string& year) {
  Tokens out;
  out.reserve(pattern.size());
  for (const auto& t : pattern) {
    if (t == "@E")
      out.push_back(ent);
    else if (t == "@P")
      out.push_back(per);
    else if (t == "@Y")
      out.push_back(year);
    else
      out.push_back(t);
  }
  return out;
}

}  // namespace

std::vector<Example> synth_corpus(int n, uint64_t seed) {
  if (n < 0) throw ArgError("corpus size must be non-negative");
  static const std::vector<Template> templates = make_templates();
  Rng rng(seed);
  std::vector<Example> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Template& tpl = templates[static_cast<size_t>(rng.next_int(
        static_cast<long>(templates.size())))];
    const std::string& ent = kEntities[static_cast<size_t>(
        rng.next_int(static_cast<long>(kEntities.size())))];
    const std::string& per = kPersons[static_cast<size_t>(
        rng.next_int(static_cast<long>(kPersons.size())))];
    std::string year = std::to_string(1604 + 10 * rng.next_int(40));

    Example ex;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "synth-%04d", i);
    ex.id = idbuf;
    ex.sentence = fill(tpl.sentence, ent, per, year);
    ex.pos = tpl.pos;
    ex.ner = tpl.ner;
    ex.answer_span = Span{tpl.answer_index, tpl.answer_index};

    long nq = 1 + rng.next_int(3);
    long start = rng.next_int(3);
    for (long j = 0; j < nq; ++j) {
      const Tokens& q = tpl.questions[static_cast<size_t>((start + j) % 3)];
      ex.questions.push_back(fill(q, ent, per, year));
    }
    validate_example(ex, ex.id);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace qgrl
