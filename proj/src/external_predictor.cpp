#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <mutex>

#include "iceimpact/error.hpp"
#include "iceimpact/predictors.hpp"
#include "iceimpact/serialize.hpp"

extern char** environ;

namespace iceimpact {

namespace {

using Clock = std::chrono::steady_clock;

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

std::string describe_status(int status) {
  if (WIFEXITED(status)) return "exited with status " + std::to_string(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) return "killed by signal " + std::to_string(WTERMSIG(status));
  return "stopped";
}

std::string trim_line(std::string_view line) {
  const auto first = line.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = line.find_last_not_of(" \t\r");
  return std::string(line.substr(first, last - first + 1));
}

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  return left.count() < 0 ? 0 : static_cast<int>(left.count());
}

}  // namespace

struct ExternalPredictor::Process {
  pid_t pid = -1;
  int to_child = -1;
  int from_child = -1;
  bool exited = false;
  int status = 0;
  std::string pending;  // bytes read past the last consumed line

  ~Process() {
    close_input();
    if (from_child >= 0) ::close(from_child);
    if (!exited && pid > 0) {
      // Give a well-behaved child a moment to see EOF, then kill it.
      const auto deadline = Clock::now() + std::chrono::milliseconds(500);
      while (!reap(false) && Clock::now() < deadline) ::usleep(1000);
      if (!exited) {
        ::kill(pid, SIGKILL);
        reap(true);
      }
    }
  }

  void close_input() {
    if (to_child >= 0) {
      ::close(to_child);
      to_child = -1;
    }
  }

  // Returns true once the child has been reaped.
  bool reap(bool block) {
    if (exited) return true;
    int st = 0;
    const pid_t r = ::waitpid(pid, &st, block ? 0 : WNOHANG);
    if (r == pid) {
      exited = true;
      status = st;
    }
    return exited;
  }

  bool succeeded() const { return exited && WIFEXITED(status) && WEXITSTATUS(status) == 0; }

  void kill_now() {
    if (!exited && pid > 0) {
      ::kill(pid, SIGKILL);
      reap(true);
    }
  }
};

ExternalPredictor::ExternalPredictor(std::vector<std::string> argv, const ExternalOptions& options)
    : argv_(std::move(argv)), options_(options), width_(options.n_features) {
  if (argv_.empty()) throw InvalidArgument("external predictor needs a command");
  if (options_.timeout.count() <= 0) throw InvalidArgument("timeout must be positive");
  ignore_sigpipe();

  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) {
    throw ChildProcessError(0, std::string("pipe: ") + std::strerror(errno));
  }
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw ChildProcessError(0, std::string("pipe: ") + std::strerror(errno));
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);

  pid_t pid = -1;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    throw ChildProcessError(0, "cannot start '" + argv_[0] + "': " + std::strerror(rc));
  }

  process_ = std::make_unique<Process>();
  process_->pid = pid;
  process_->to_child = in_pipe[1];
  process_->from_child = out_pipe[0];
  ::fcntl(process_->to_child, F_SETFL, ::fcntl(process_->to_child, F_GETFL) | O_NONBLOCK);
  ::fcntl(process_->from_child, F_SETFL, ::fcntl(process_->from_child, F_GETFL) | O_NONBLOCK);

  std::string command;
  for (const auto& a : argv_) command += (command.empty() ? "" : " ") + a;
  metadata_["command"] = command;
  metadata_["timeout_ms"] = std::to_string(options_.timeout.count());
}

ExternalPredictor::~ExternalPredictor() = default;

std::shared_ptr<Predictor> ExternalPredictor::replicate() const {
  ExternalOptions options = options_;
  {
    std::lock_guard lock(mutex_);
    options.n_features = width_;
  }
  return std::make_shared<ExternalPredictor>(argv_, options);
}

std::size_t ExternalPredictor::batches_sent() const {
  std::lock_guard lock(mutex_);
  return batch_index_;
}

std::vector<double> ExternalPredictor::predict_rows(const Matrix& rows) const {
  std::lock_guard lock(mutex_);
  const std::size_t batch = batch_index_++;
  Process& proc = *process_;

  if (proc.exited || proc.to_child < 0) {
    throw ChildProcessError(batch, "child process is no longer running");
  }
  if (width_ == 0) width_ = rows.cols();
  if (rows.cols() != width_) {
    throw DimensionMismatchError("external predictor expects " + std::to_string(width_) +
                                 " columns, got " + std::to_string(rows.cols()));
  }

  // Output left over from the previous batch means the child answered with
  // too many lines.
  {
    char buf[4096];
    const ssize_t got = ::read(proc.from_child, buf, sizeof buf);
    if (got > 0) proc.pending.append(buf, static_cast<std::size_t>(got));
    if (!trim_line(proc.pending).empty()) {
      proc.kill_now();
      throw CountMismatchError(batch, "child wrote more lines than requested in a previous batch");
    }
    proc.pending.clear();
  }

  const std::size_t k = rows.rows();
  std::string request = "BATCH " + std::to_string(k) + " " + std::to_string(rows.cols()) + "\n";
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < rows.cols(); ++c) {
      if (c) request.push_back(',');
      request += format_real(rows(r, c));
    }
    request.push_back('\n');
  }

  std::vector<double> out;
  out.reserve(k);
  std::size_t written = 0;
  bool write_closed = false;
  bool eof = false;
  const auto deadline = Clock::now() + options_.timeout;

  auto consume_lines = [&] {
    std::size_t start = 0;
    for (std::size_t nl; out.size() < k && (nl = proc.pending.find('\n', start)) != std::string::npos;
         start = nl + 1) {
      const std::string line = trim_line(std::string_view(proc.pending).substr(start, nl - start));
      double value = 0.0;
      const char* b = line.data();
      const char* e = line.data() + line.size();
      if (b != e && *b == '+') ++b;
      auto [ptr, ec] = std::from_chars(b, e, value);
      if (line.empty() || ec != std::errc() || ptr != e || !std::isfinite(value)) {
        proc.kill_now();
        throw MalformedResponseError(batch, "response line " + std::to_string(out.size() + 1) +
                                                " is not a finite real: '" + line + "'");
      }
      out.push_back(value);
    }
    proc.pending.erase(0, start);
  };

  while (out.size() < k && !eof) {
    pollfd fds[2];
    nfds_t nfds = 0;
    fds[nfds++] = {proc.from_child, POLLIN, 0};
    const bool want_write = !write_closed && written < request.size();
    if (want_write) fds[nfds++] = {proc.to_child, POLLOUT, 0};

    const int ready = ::poll(fds, nfds, remaining_ms(deadline));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw ChildProcessError(batch, std::string("poll: ") + std::strerror(errno));
    }
    if (ready == 0) {
      proc.kill_now();
      throw TimeoutError(batch, "no complete response within " +
                                    std::to_string(options_.timeout.count()) + " ms (received " +
                                    std::to_string(out.size()) + " of " + std::to_string(k) +
                                    " predictions)");
    }

    if (want_write && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t n = ::write(proc.to_child, request.data() + written, request.size() - written);
      if (n > 0) {
        written += static_cast<std::size_t>(n);
      } else if (n < 0 && errno != EAGAIN && errno != EINTR) {
        write_closed = true;  // EPIPE: the child stopped reading
      }
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      char buf[65536];
      const ssize_t n = ::read(proc.from_child, buf, sizeof buf);
      if (n > 0) {
        proc.pending.append(buf, static_cast<std::size_t>(n));
        consume_lines();
      } else if (n == 0) {
        eof = true;
      } else if (errno != EAGAIN && errno != EINTR) {
        eof = true;
      }
    }
  }

  if (out.size() < k) {
    // The child closed its stdout early. A clean exit means it simply
    // answered too few lines; anything else is a crash.
    const auto reap_deadline = Clock::now() + std::chrono::milliseconds(2000);
    while (!proc.reap(false) && Clock::now() < reap_deadline) ::usleep(1000);
    if (!proc.exited) proc.kill_now();
    proc.close_input();
    if (proc.succeeded() && written == request.size()) {
      throw CountMismatchError(batch, "expected " + std::to_string(k) + " predictions, received " +
                                          std::to_string(out.size()));
    }
    throw ChildProcessError(batch, "child " + describe_status(proc.status) + " after " +
                                       std::to_string(out.size()) + " of " + std::to_string(k) +
                                       " predictions");
  }
  if (!trim_line(proc.pending).empty()) {
    proc.kill_now();
    proc.close_input();
    throw CountMismatchError(batch, "child wrote more than " + std::to_string(k) + " lines");
  }
  if (options_.output == OutputKind::kProbability) {
    for (double v : out) {
      if (v < 0.0 || v > 1.0) {
        throw MalformedResponseError(batch, "probability " + format_real(v) + " outside [0, 1]");
      }
    }
  }
  return out;
}

void ExternalPredictor::finish() {
  std::lock_guard lock(mutex_);
  Process& proc = *process_;
  if (proc.exited && proc.to_child < 0) {
    if (!proc.succeeded()) {
      throw ChildProcessError(batch_index_, "child " + describe_status(proc.status));
    }
    return;
  }
  proc.close_input();

  const auto deadline = Clock::now() + options_.timeout;
  std::string trailing;
  for (;;) {
    pollfd fd{proc.from_child, POLLIN, 0};
    const int ready = ::poll(&fd, 1, remaining_ms(deadline));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) {
      proc.kill_now();
      throw TimeoutError(batch_index_, "child did not exit after stdin was closed");
    }
    char buf[4096];
    const ssize_t n = ::read(proc.from_child, buf, sizeof buf);
    if (n > 0) {
      trailing.append(buf, static_cast<std::size_t>(n));
      continue;
    }
    if (n < 0 && (errno == EAGAIN || errno == EINTR)) continue;
    break;
  }
  proc.reap(true);
  if (!proc.succeeded()) {
    throw ChildProcessError(batch_index_, "child " + describe_status(proc.status));
  }
  if (!trim_line(proc.pending + trailing).empty()) {
    throw CountMismatchError(batch_index_ == 0 ? 0 : batch_index_ - 1,
                             "child wrote output beyond the last requested prediction");
  }
}

std::shared_ptr<ExternalPredictor> external_predictor(std::vector<std::string> argv,
                                                      const ExternalOptions& options) {
  return std::make_shared<ExternalPredictor>(std::move(argv), options);
}

}  // namespace iceimpact
