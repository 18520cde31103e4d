#include "qgrl/answer_predictor.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <set>

#include <json.hpp>

namespace qgrl {

OverlapOracle::OverlapOracle(int max_span) : max_span_(max_span) {
  if (max_span < 1)
    throw ArgError("overlap-oracle: max_span must be >= 1");
}

Span OverlapOracle::predict_span(const Tokens& sentence,
                                 const Tokens& question) const {
  if (sentence.empty()) throw ArgError("overlap-oracle: empty sentence");
  std::set<std::string> qwords(question.begin(), question.end());
  const int T = static_cast<int>(sentence.size());
  Span best{0, 0};
  int best_count = -1;
  for (int s = 0; s < T; ++s) {
    int count = 0;
    int hi = std::min(T - 1, s + max_span_ - 1);
    for (int e = s; e <= hi; ++e) {
      if (qwords.count(sentence[static_cast<size_t>(e)])) ++count;
      if (count > best_count) {
        best_count = count;
        best = Span{s, e};
      }
    }
  }
  return best;
}

Tokens OverlapOracle::predict(const Tokens& sentence, const Tokens& question) {
  Span sp = predict_span(sentence, question);
  return span_tokens(sentence, sp);
}

ExternalPredictor::ExternalPredictor(std::string command, int timeout_ms)
    : command_(std::move(command)), timeout_ms_(timeout_ms) {
  if (command_.empty())
    throw ArgError("external predictor: empty command");
  if (timeout_ms_ < 1)
    throw ArgError("external predictor: timeout must be positive");
}

ExternalPredictor::~ExternalPredictor() { mark_dead(); }

void ExternalPredictor::mark_dead() {
  dead_ = true;
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
  if (from_child_ >= 0) {
    ::close(from_child_);
    from_child_ = -1;
  }
  if (pid_ > 0) {
    ::kill(static_cast<pid_t>(pid_), SIGKILL);
    int status = 0;
    ::waitpid(static_cast<pid_t>(pid_), &status, 0);
    pid_ = -1;
  }
}

void ExternalPredictor::spawn() {
  // A predictor that exits mid-protocol would otherwise kill us with SIGPIPE
  // on the next request write.
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];   // parent -> child
  int out_pipe[2];  // child -> parent
  if (::pipe(in_pipe) != 0)
    throw IoError("external predictor: pipe failed: " +
                  std::string(std::strerror(errno)));
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw IoError("external predictor: pipe failed: " +
                  std::string(std::strerror(errno)));
  }
  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    throw IoError("external predictor: fork failed: " +
                  std::string(std::strerror(errno)));
  }
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), (char*)nullptr);
    _exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  int flags = ::fcntl(from_child_, F_GETFL, 0);
  ::fcntl(from_child_, F_SETFL, flags | O_NONBLOCK);
  pid_ = pid;
  spawned_ = true;
}

Tokens ExternalPredictor::predict(const Tokens& sentence,
                                  const Tokens& question) {
  if (dead_)
    throw PredictorError("external predictor '" + command_ +
                         "' is marked dead after an earlier failure");
  if (!spawned_) spawn();

  nlohmann::json req;
  req["sentence"] = sentence;
  req["question"] = question;
  std::string line = req.dump();
  line.push_back('\n');
  size_t off = 0;
  while (off < line.size()) {
    ssize_t n = ::write(to_child_, line.data() + off, line.size() - off);
    if (n <= 0) {
      mark_dead();
      throw PredictorError("external predictor '" + command_ +
                           "': request write failed");
    }
    off += static_cast<size_t>(n);
  }

  // Wait for one full reply line within the timeout budget.
  while (buf_.find('\n') == std::string::npos) {
    struct pollfd pfd{};
    pfd.fd = from_child_;
    pfd.events = POLLIN;
    int pr = ::poll(&pfd, 1, timeout_ms_);
    if (pr == 0) {
      mark_dead();
      throw PredictorError("external predictor '" + command_ +
                           "' timed out after " + std::to_string(timeout_ms_) +
                           " ms");
    }
    if (pr < 0) {
      if (errno == EINTR) continue;
      mark_dead();
      throw PredictorError("external predictor '" + command_ +
                           "': poll failed: " + std::strerror(errno));
    }
    char chunk[4096];
    ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n > 0) {
      buf_.append(chunk, static_cast<size_t>(n));
    } else if (n == 0) {
      mark_dead();
      throw PredictorError("external predictor '" + command_ +
                           "' closed its output stream");
    } else if (errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
      mark_dead();
      throw PredictorError("external predictor '" + command_ +
                           "': read failed: " + std::strerror(errno));
    }
  }
  size_t nl = buf_.find('\n');
  std::string reply = buf_.substr(0, nl);
  buf_.erase(0, nl + 1);

  nlohmann::json parsed = nlohmann::json::parse(reply, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object() ||
      !parsed.contains("answer") || !parsed["answer"].is_array()) {
    mark_dead();
    throw PredictorError("external predictor '" + command_ +
                         "' sent a malformed reply: " + reply);
  }
  Tokens answer;
  for (const auto& item : parsed["answer"]) {
    if (!item.is_string()) {
      mark_dead();
      throw PredictorError("external predictor '" + command_ +
                           "' sent a non-string answer token");
    }
    answer.push_back(item.get<std::string>());
  }
  return answer;
}

std::unique_ptr<AnswerPredictor> make_predictor(const std::string& command) {
  std::string cmd = command;
  if (const char* env = std::getenv("QGRL_ANSWER_CMD"); env && *env)
    cmd = env;
  if (cmd.empty() || cmd == "overlap-oracle")
    return std::make_unique<OverlapOracle>();
  return std::make_unique<ExternalPredictor>(cmd);
}

}  // namespace qgrl
