#include "stabletree/oracle/external.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <nlohmann/json.hpp>

#include "stabletree/error.hpp"

namespace stabletree::oracle {

using nlohmann::json;

ExternalProcessOracle::ExternalProcessOracle(std::string command, std::size_t class_count,
                                             std::size_t feature_count,
                                             std::chrono::milliseconds timeout, std::size_t max_batch)
    : command_(std::move(command)),
      k_(class_count),
      m_(feature_count),
      timeout_(timeout),
      max_batch_(std::max<std::size_t>(max_batch, 1)) {
  if (command_.empty()) throw ConfigError("external oracle command is empty");
  if (k_ < 2) throw ConfigError("external oracle needs at least 2 classes");
}

ExternalProcessOracle::~ExternalProcessOracle() {
  std::lock_guard lock(mutex_);
  stop();
}

void ExternalProcessOracle::start() const {
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0) throw OracleIoError(std::string("pipe: ") + std::strerror(errno));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw OracleIoError(std::string("pipe: ") + std::strerror(errno));
  }
  const pid_t pid = fork();
  if (pid < 0) throw OracleIoError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
  fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  pending_.clear();
}

void ExternalProcessOracle::stop() const {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, &status, WNOHANG) != 0) {
        pid_ = -1;
        return;
      }
      usleep(10000);
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string ExternalProcessOracle::exchange(const std::string& request) const {
  if (pid_ < 0) start();
  // A dead child turns writes into EPIPE instead of killing us.
  struct sigaction ignore {};
  struct sigaction previous {};
  ignore.sa_handler = SIG_IGN;
  sigaction(SIGPIPE, &ignore, &previous);
  std::size_t written = 0;
  while (written < request.size()) {
    const ssize_t w = write(to_child_, request.data() + written, request.size() - written);
    if (w < 0) {
      if (errno == EINTR) continue;
      const std::string reason = std::strerror(errno);
      sigaction(SIGPIPE, &previous, nullptr);
      stop();
      throw OracleIoError("external oracle '" + command_ + "': write failed (" + reason + ")");
    }
    written += static_cast<std::size_t>(w);
  }
  sigaction(SIGPIPE, &previous, nullptr);

  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  char buf[65536];
  for (;;) {
    if (const auto nl = pending_.find('\n'); nl != std::string::npos) {
      std::string line = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      stop();
      throw OracleIoError("external oracle '" + command_ + "': timed out after " +
                          std::to_string(timeout_.count()) + " ms");
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0 && errno == EINTR) continue;
    if (ready == 0) continue;
    const ssize_t r = read(from_child_, buf, sizeof buf);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) {
      stop();
      throw OracleIoError("external oracle '" + command_ + "': process closed its output (crashed or exited)");
    }
    pending_.append(buf, static_cast<std::size_t>(r));
  }
}

core::Matrix ExternalProcessOracle::predict_proba(const core::Matrix& rows) const {
  core::Matrix out(rows.rows, k_);
  if (rows.rows == 0) return out;
  if (rows.cols != m_)
    throw SchemaError("external oracle expects " + std::to_string(m_) + " columns, got " +
                      std::to_string(rows.cols));
  std::lock_guard lock(mutex_);
  for (std::size_t lo = 0; lo < rows.rows; lo += max_batch_) {
    const std::size_t hi = std::min(rows.rows, lo + max_batch_);
    const std::uint64_t id = next_id_++;
    json batch = json::array();
    for (std::size_t i = lo; i < hi; ++i) batch.push_back(std::vector<double>(rows.row(i).begin(), rows.row(i).end()));
    const std::string line = exchange(json{{"id", id}, {"rows", std::move(batch)}}.dump() + "\n");
    json reply;
    try {
      reply = json::parse(line);
      if (reply.at("id").get<std::uint64_t>() != id)
        throw OracleIoError("external oracle '" + command_ + "': reply id " +
                            reply.at("id").dump() + " does not match request " + std::to_string(id));
      const auto& probs = reply.at("probs");
      if (!probs.is_array() || probs.size() != hi - lo)
        throw OracleIoError("external oracle '" + command_ + "': expected " + std::to_string(hi - lo) +
                            " probability rows");
      for (std::size_t i = lo; i < hi; ++i) {
        const auto& row = probs[i - lo];
        if (!row.is_array() || row.size() != k_)
          throw OracleIoError("external oracle '" + command_ + "': probability row " +
                              std::to_string(i - lo) + " has the wrong width");
        for (std::size_t j = 0; j < k_; ++j) out(i, j) = row[j].get<double>();
      }
    } catch (const json::exception& e) {
      throw OracleIoError("external oracle '" + command_ + "': malformed reply (" + e.what() +
                          "): " + line.substr(0, 200));
    }
  }
  check_probabilities(out, rows.rows, k_);
  return out;
}

}  // namespace stabletree::oracle
