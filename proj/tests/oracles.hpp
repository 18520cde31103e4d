#pragma once

// Independent reference implementations used only by tests. These are written
// from the definitions with plain loops and deliberately share no code with
// the library.

#include <cstdint>
#include <string>
#include <vector>

namespace oracle {

using Toks = std::vector<std::string>;

// Independent transcription of splitmix64 -> xoshiro256**.
class TestRng {
 public:
  explicit TestRng(uint64_t seed);
  uint64_t next();

 private:
  uint64_t st_[4];
};

double precision_n(const Toks& cand, const Toks& ref, int n);
double bleu(const Toks& cand, const std::vector<Toks>& refs, int max_n);
double gleu(const Toks& cand, const std::vector<Toks>& refs, int max_n);
double rouge_l(const Toks& cand, const Toks& ref);
double qss(const Toks& question, const Toks& sentence, int max_n);
double anss(const Toks& predicted, const Toks& pivotal, int max_n);

}  // namespace oracle
