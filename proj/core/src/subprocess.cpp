#include "slomo/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <optional>
#include <utility>

#include "slomo/error.hpp"

extern char** environ;

namespace slomo {
namespace {

constexpr std::size_t kMaxDiagnostics = 8192;

void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

void close_fd(int& fd) noexcept {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

struct Pipe {
  int read = -1;
  int write = -1;
  Pipe() {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) {
      fail(ErrorCode::kInternal, std::string("pipe2: ") + std::strerror(errno));
    }
    read = fds[0];
    write = fds[1];
  }
  ~Pipe() {
    close_fd(read);
    close_fd(write);
  }
};

}  // namespace

std::vector<std::string> split_command(std::string_view command) {
  std::vector<std::string> argv;
  std::string current;
  bool in_token = false;
  for (std::size_t i = 0; i < command.size(); ++i) {
    const char c = command[i];
    if (c == ' ' || c == '\t' || c == '\n') {
      if (in_token) argv.push_back(std::move(current));
      current.clear();
      in_token = false;
    } else if (c == '\'') {
      const auto end = command.find('\'', i + 1);
      if (end == std::string_view::npos) fail(ErrorCode::kConfiguration, "unterminated ' in command");
      current.append(command.substr(i + 1, end - i - 1));
      i = end;
      in_token = true;
    } else if (c == '"') {
      std::size_t j = i + 1;
      for (; j < command.size() && command[j] != '"'; ++j) {
        if (command[j] == '\\' && j + 1 < command.size() &&
            (command[j + 1] == '"' || command[j + 1] == '\\')) {
          ++j;
        }
        current.push_back(command[j]);
      }
      if (j >= command.size()) fail(ErrorCode::kConfiguration, "unterminated \" in command");
      i = j;
      in_token = true;
    } else if (c == '\\' && i + 1 < command.size()) {
      current.push_back(command[++i]);
      in_token = true;
    } else {
      current.push_back(c);
      in_token = true;
    }
  }
  if (in_token) argv.push_back(std::move(current));
  return argv;
}

std::vector<std::string> expand_command(const std::vector<std::string>& argv,
                                        const std::map<std::string, std::string>& values) {
  std::vector<std::string> out;
  out.reserve(argv.size());
  for (const auto& token : argv) {
    std::string expanded = token;
    for (const auto& [name, value] : values) {
      const std::string key = "{" + name + "}";
      for (auto pos = expanded.find(key); pos != std::string::npos;
           pos = expanded.find(key, pos + value.size())) {
        expanded.replace(pos, key.size(), value);
      }
    }
    out.push_back(std::move(expanded));
  }
  return out;
}

Subprocess::Subprocess(Subprocess&& other) noexcept
    : pid_(other.pid_),
      stdin_fd_(other.stdin_fd_),
      stdout_fd_(other.stdout_fd_),
      stderr_fd_(other.stderr_fd_),
      status_(other.status_) {
  other.pid_ = -1;
  other.stdin_fd_ = other.stdout_fd_ = other.stderr_fd_ = -1;
}

Subprocess& Subprocess::operator=(Subprocess&& other) noexcept {
  if (this != &other) {
    kill();
    close_all();
    pid_ = other.pid_;
    stdin_fd_ = other.stdin_fd_;
    stdout_fd_ = other.stdout_fd_;
    stderr_fd_ = other.stderr_fd_;
    status_ = other.status_;
    other.pid_ = -1;
    other.stdin_fd_ = other.stdout_fd_ = other.stderr_fd_ = -1;
  }
  return *this;
}

Subprocess::~Subprocess() {
  kill();
  close_all();
}

Subprocess Subprocess::spawn(const std::vector<std::string>& argv, Stderr stderr_mode) {
  if (argv.empty()) fail(ErrorCode::kConfiguration, "empty command");
  ignore_sigpipe_once();

  Pipe in, out;
  std::optional<Pipe> err;
  if (stderr_mode == Stderr::kPipe) err.emplace();

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in.read, STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out.write, STDOUT_FILENO);
  if (err) posix_spawn_file_actions_adddup2(&actions, err->write, STDERR_FILENO);
  if (stderr_mode == Stderr::kDiscard) {
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);
  }

  std::vector<char*> args;
  args.reserve(argv.size() + 1);
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = -1;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) {
    fail(ErrorCode::kConfiguration,
         "cannot start '" + argv[0] + "': " + std::strerror(rc));
  }

  Subprocess proc;
  proc.pid_ = pid;
  proc.stdin_fd_ = std::exchange(in.write, -1);
  proc.stdout_fd_ = std::exchange(out.read, -1);
  if (err) proc.stderr_fd_ = std::exchange(err->read, -1);
  return proc;
}

bool Subprocess::write_all(std::span<const std::uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(stdin_fd_, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EPIPE) return false;
      fail(ErrorCode::kIo, std::string("write to child: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

std::size_t Subprocess::read_exact(std::span<std::uint8_t> out, int timeout_ms, bool* timed_out) {
  std::size_t done = 0;
  if (timed_out) *timed_out = false;
  while (done < out.size()) {
    if (timeout_ms >= 0) {
      pollfd pfd{stdout_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, timeout_ms);
      if (ready < 0 && errno == EINTR) continue;
      if (ready == 0) {
        if (timed_out) *timed_out = true;
        break;
      }
    }
    const ssize_t n = ::read(stdout_fd_, out.data() + done, out.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kIo, std::string("read from child: ") + std::strerror(errno));
    }
    if (n == 0) break;
    done += static_cast<std::size_t>(n);
  }
  return done;
}

void Subprocess::close_stdin() { close_fd(stdin_fd_); }

int Subprocess::wait() {
  if (pid_ > 0) {
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0) {
      if (errno != EINTR) break;
    }
    pid_ = -1;
    if (WIFEXITED(status)) {
      status_ = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
      status_ = 128 + WTERMSIG(status);
    }
  }
  return status_;
}

int Subprocess::wait_or_kill(int grace_ms) {
  if (pid_ <= 0) return status_;
  for (int waited = 0;; waited += 5) {
    int status = 0;
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      pid_ = -1;
      if (WIFEXITED(status)) {
        status_ = WEXITSTATUS(status);
      } else if (WIFSIGNALED(status)) {
        status_ = 128 + WTERMSIG(status);
      }
      return status_;
    }
    if (r < 0 && errno != EINTR) break;
    if (waited >= grace_ms) break;
    ::usleep(5000);
  }
  kill();
  return status_;
}

void Subprocess::kill() noexcept {
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    pid_ = -1;
    status_ = 128 + SIGKILL;
  }
}

void Subprocess::close_all() noexcept {
  close_fd(stdin_fd_);
  close_fd(stdout_fd_);
  close_fd(stderr_fd_);
}

CommandResult run_command(const std::vector<std::string>& argv, std::span<const std::uint8_t> input) {
  Subprocess proc = Subprocess::spawn(argv, Subprocess::Stderr::kPipe);
  CommandResult result;
  std::size_t written = 0;
  if (input.empty()) proc.close_stdin();

  int in_fd = proc.stdin_fd();
  int out_fd = proc.stdout_fd();
  int err_fd = proc.stderr_fd();
  if (in_fd >= 0) ::fcntl(in_fd, F_SETFL, ::fcntl(in_fd, F_GETFL) | O_NONBLOCK);

  std::uint8_t buffer[65536];
  while (out_fd >= 0 || err_fd >= 0) {
    pollfd fds[3];
    int count = 0;
    int out_slot = -1, err_slot = -1, in_slot = -1;
    if (out_fd >= 0) { fds[count] = {out_fd, POLLIN, 0}; out_slot = count++; }
    if (err_fd >= 0) { fds[count] = {err_fd, POLLIN, 0}; err_slot = count++; }
    if (in_fd >= 0) { fds[count] = {in_fd, POLLOUT, 0}; in_slot = count++; }
    if (::poll(fds, static_cast<nfds_t>(count), -1) < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kIo, std::string("poll: ") + std::strerror(errno));
    }
    if (in_slot >= 0 && fds[in_slot].revents) {
      const ssize_t n = ::write(in_fd, input.data() + written, input.size() - written);
      if (n > 0) written += static_cast<std::size_t>(n);
      if ((n < 0 && errno != EAGAIN && errno != EINTR) || written == input.size()) {
        proc.close_stdin();
        in_fd = -1;
      }
    }
    auto drain = [&](int slot, int& fd, auto&& sink) {
      if (slot < 0 || !fds[slot].revents) return;
      const ssize_t n = ::read(fd, buffer, sizeof buffer);
      if (n > 0) {
        sink(static_cast<std::size_t>(n));
      } else if (n == 0 || (errno != EINTR && errno != EAGAIN)) {
        fd = -1;
      }
    };
    drain(out_slot, out_fd, [&](std::size_t n) { result.output.insert(result.output.end(), buffer, buffer + n); });
    drain(err_slot, err_fd, [&](std::size_t n) {
      const auto room = kMaxDiagnostics - std::min(kMaxDiagnostics, result.diagnostics.size());
      result.diagnostics.append(reinterpret_cast<const char*>(buffer), std::min(room, n));
    });
  }
  if (in_fd >= 0) proc.close_stdin();
  result.status = proc.wait();
  return result;
}

}  // namespace slomo
