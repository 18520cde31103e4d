#pragma once

#include <memory>
#include <string>

#include "qgrl/corpus.hpp"

namespace qgrl {

// Produces an answer-span guess for a (sentence, question) pair. Used to
// score generated questions by how well their predicted answer matches the
// pivotal answer.
class AnswerPredictor {
 public:
  virtual ~AnswerPredictor() = default;
  // Returns the predicted answer tokens. Throws PredictorError when the
  // backend cannot answer (dead process, timeout, malformed reply).
  virtual Tokens predict(const Tokens& sentence, const Tokens& question) = 0;
  virtual std::string name() const = 0;
};

// Built-in fallback: picks the sentence span of length <= max_span with the
// highest count of positions whose token also occurs in the question, ties
// broken by smallest start then smallest end.
class OverlapOracle final : public AnswerPredictor {
 public:
  explicit OverlapOracle(int max_span = 8);
  Tokens predict(const Tokens& sentence, const Tokens& question) override;
  std::string name() const override { return "overlap-oracle"; }

  // The raw span, for callers that need boundaries rather than tokens.
  Span predict_span(const Tokens& sentence, const Tokens& question) const;

 private:
  int max_span_;
};

// Wraps an external command speaking a line protocol on stdin/stdout: one
// JSON request {"sentence":[...],"question":[...]} per line in, one JSON
// reply {"answer":[...]} per line out. Each request must complete within the
// timeout; a timeout, crash, or malformed reply marks the process dead and
// every later call fails fast with PredictorError.
class ExternalPredictor final : public AnswerPredictor {
 public:
  explicit ExternalPredictor(std::string command, int timeout_ms = 5000);
  ~ExternalPredictor() override;
  ExternalPredictor(const ExternalPredictor&) = delete;
  ExternalPredictor& operator=(const ExternalPredictor&) = delete;

  Tokens predict(const Tokens& sentence, const Tokens& question) override;
  std::string name() const override { return "external:" + command_; }
  bool dead() const { return dead_; }

 private:
  void spawn();
  void mark_dead();

  std::string command_;
  int timeout_ms_;
  long pid_ = -1;
  int to_child_ = -1;    // our write end of the child's stdin
  int from_child_ = -1;  // our read end of the child's stdout
  bool spawned_ = false;
  bool dead_ = false;
  std::string buf_;
};

// Resolves a predictor choice. The QGRL_ANSWER_CMD environment variable
// overrides the argument; "overlap-oracle" or an empty string selects the
// built-in oracle; anything else runs as a shell command.
std::unique_ptr<AnswerPredictor> make_predictor(const std::string& command);

}  // namespace qgrl
