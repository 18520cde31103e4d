#include "qgrl/runconfig.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

namespace qgrl {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& v) {
  errno = 0;
  char* end = nullptr;
  long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0' || errno == ERANGE)
    throw ConfigError("not an integer: '" + v + "'");
  return x;
}

uint64_t parse_u64(const std::string& v) {
  errno = 0;
  char* end = nullptr;
  unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0' || errno == ERANGE ||
      v.find('-') != std::string::npos)
    throw ConfigError("not a non-negative integer: '" + v + "'");
  return static_cast<uint64_t>(x);
}

double parse_double(const std::string& v) {
  errno = 0;
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0' || errno == ERANGE)
    throw ConfigError("not a number: '" + v + "'");
  return x;
}

bool parse_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("not a boolean (true|false): '" + v + "'");
}

std::vector<double> parse_weights(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_double(trim(part)));
  return out;
}

}  // namespace

RunConfig RunConfig::from_text(const std::string& text,
                               const std::string& where) {
  RunConfig rc;
  using Setter = std::function<void(const std::string&)>;
  const std::map<std::string, Setter> keys = {
      {"corpus", [&](const std::string& v) { rc.corpus = v; }},
      {"checkpoint", [&](const std::string& v) { rc.checkpoint = v; }},
      {"das_checkpoint", [&](const std::string& v) { rc.das_checkpoint = v; }},
      {"out", [&](const std::string& v) { rc.out = v; }},
      {"step_log", [&](const std::string& v) { parse_bool(v); rc.step_log = v; }},
      {"answer_cmd", [&](const std::string& v) { rc.answer_cmd = v; }},
      {"epochs",
       [&](const std::string& v) { rc.train.epochs = static_cast<int>(parse_int(v)); }},
      {"pointer_epochs",
       [&](const std::string& v) {
         rc.train.pointer_epochs = static_cast<int>(parse_int(v));
       }},
      {"lr", [&](const std::string& v) { rc.train.lr = parse_double(v); }},
      {"rl_lr", [&](const std::string& v) { rc.train.rl_lr = parse_double(v); }},
      {"lambda_c",
       [&](const std::string& v) { rc.train.lambda_c = parse_double(v); }},
      {"alpha", [&](const std::string& v) { rc.train.alpha = parse_double(v); }},
      {"beta", [&](const std::string& v) { rc.train.beta = parse_double(v); }},
      {"seed", [&](const std::string& v) { rc.train.seed = parse_u64(v); }},
      {"reward.base",
       [&](const std::string& v) { rc.train.reward.base = base_metric_from_name(v); }},
      {"reward.qss",
       [&](const std::string& v) { rc.train.reward.use_qss = parse_bool(v); }},
      {"reward.anss",
       [&](const std::string& v) { rc.train.reward.use_anss = parse_bool(v); }},
      {"reward.max_n",
       [&](const std::string& v) {
         rc.train.reward.max_n = static_cast<int>(parse_int(v));
       }},
      {"reward.weights",
       [&](const std::string& v) { rc.train.reward.weights = parse_weights(v); }},
      {"reward_mode",
       [&](const std::string& v) { rc.train.reward_mode = reward_mode_from_name(v); }},
      {"baseline",
       [&](const std::string& v) { rc.train.baseline = baseline_mode_from_name(v); }},
      {"samples_per_step",
       [&](const std::string& v) {
         rc.train.samples_per_step = static_cast<int>(parse_int(v));
       }},
      {"heldout_fraction",
       [&](const std::string& v) { rc.train.heldout_fraction = parse_double(v); }},
      {"max_len",
       [&](const std::string& v) { rc.train.max_len = static_cast<int>(parse_int(v)); }},
      {"vocab_cap",
       [&](const std::string& v) {
         rc.train.vocab_cap = static_cast<int>(parse_int(v));
       }},
      {"word_dim",
       [&](const std::string& v) {
         rc.train.dims.word_dim = static_cast<int>(parse_int(v));
       }},
      {"feat_dim",
       [&](const std::string& v) {
         rc.train.dims.feat_dim = static_cast<int>(parse_int(v));
       }},
      {"enc_hidden",
       [&](const std::string& v) {
         rc.train.dims.enc_hidden = static_cast<int>(parse_int(v));
       }},
      {"enc_layers",
       [&](const std::string& v) {
         rc.train.dims.enc_layers = static_cast<int>(parse_int(v));
       }},
      {"dec_hidden",
       [&](const std::string& v) {
         rc.train.dims.dec_hidden = static_cast<int>(parse_int(v));
       }},
      {"att_dim",
       [&](const std::string& v) {
         rc.train.dims.att_dim = static_cast<int>(parse_int(v));
       }},
      {"ptr_hidden",
       [&](const std::string& v) {
         rc.train.dims.ptr_hidden = static_cast<int>(parse_int(v));
       }},
      {"ptr_att_dim",
       [&](const std::string& v) {
         rc.train.dims.ptr_att_dim = static_cast<int>(parse_int(v));
       }},
      {"max_span",
       [&](const std::string& v) {
         rc.train.dims.max_span = static_cast<int>(parse_int(v));
       }},
      {"das.epochs",
       [&](const std::string& v) {
         rc.das_train.epochs = static_cast<int>(parse_int(v));
       }},
      {"das.lr",
       [&](const std::string& v) { rc.das_train.lr = parse_double(v); }},
      {"das.heldout_fraction",
       [&](const std::string& v) {
         rc.das_train.heldout_fraction = parse_double(v);
       }},
      {"das.seed",
       [&](const std::string& v) { rc.das_train.seed = parse_u64(v); }},
  };

  std::vector<std::string> problems;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(lineno) +
                         ": expected key=value, got '" + t + "'");
      continue;
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    auto it = keys.find(key);
    if (it == keys.end()) {
      problems.push_back("line " + std::to_string(lineno) + ": unknown key '" +
                         key + "'");
      continue;
    }
    try {
      it->second(value);
    } catch (const Error& e) {
      problems.push_back("line " + std::to_string(lineno) + ": key '" + key +
                         "': " + e.what());
    }
  }

  if (!problems.empty()) {
    std::string msg = where + ": " + std::to_string(problems.size()) +
                      " config problem(s):";
    for (const std::string& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return rc;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw IoError("cannot open config file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_text(text, path);
}

std::string RunConfig::resolved_json() const {
  nlohmann::json j;
  j["train"] = nlohmann::json::parse(train.to_json());
  j["das"] = {{"epochs", das_train.epochs},
              {"lr", das_train.lr},
              {"heldout_fraction", das_train.heldout_fraction},
              {"seed", das_train.seed}};
  j["corpus"] = corpus;
  j["checkpoint"] = checkpoint;
  j["das_checkpoint"] = das_checkpoint;
  j["out"] = out;
  j["step_log"] = step_log;
  j["answer_cmd"] = answer_cmd;
  return j.dump();
}

}  // namespace qgrl
