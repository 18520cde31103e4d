#pragma once

#include <string>

#include "qgrl/das.hpp"
#include "qgrl/train.hpp"

namespace qgrl {

// A run description parsed from a line-oriented key=value file: training
// hyperparameters plus the paths and reward selection a command needs. Full
// lines starting with '#' are comments; blank lines are skipped; later
// assignments to the same key win. Every malformed line and every unknown
// key is collected, and one ConfigError reports them all.
struct RunConfig {
  TrainConfig train;
  DasTrainConfig das_train;    // das.* keys, used by DAS training
  std::string corpus;          // input corpus path
  std::string checkpoint;      // input checkpoint path (fine-tuning)
  std::string das_checkpoint;  // trained DAS model, required for a das reward
  std::string out;             // output file or directory
  std::string step_log;        // "true" enables per-step decode logs
  std::string answer_cmd;      // external answer-predictor command line

  static RunConfig from_file(const std::string& path);
  // `where` names the source (a path or a test label) in error messages.
  static RunConfig from_text(const std::string& text, const std::string& where);

  // The fully resolved configuration as one JSON object, for run logging.
  std::string resolved_json() const;
};

}  // namespace qgrl
