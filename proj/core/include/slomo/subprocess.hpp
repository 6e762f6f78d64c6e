#pragma once

#include <sys/types.h>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slomo {

/// Splits a command template into argv the way a POSIX shell would for plain
/// words, single quotes, double quotes and backslash escapes. No expansion.
std::vector<std::string> split_command(std::string_view command);

/// Replaces {name} placeholders inside each argv token.
std::vector<std::string> expand_command(const std::vector<std::string>& argv,
                                        const std::map<std::string, std::string>& values);

/// A child process with piped stdin/stdout and configurable stderr.
/// The destructor kills a still-running child and reaps it.
class Subprocess {
 public:
  enum class Stderr { kInherit, kPipe, kDiscard };

  Subprocess() = default;
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;
  Subprocess(Subprocess&& other) noexcept;
  Subprocess& operator=(Subprocess&& other) noexcept;
  ~Subprocess();

  /// Throws kConfiguration when the executable cannot be found or started.
  static Subprocess spawn(const std::vector<std::string>& argv, Stderr stderr_mode = Stderr::kInherit);

  pid_t pid() const noexcept { return pid_; }
  int stdin_fd() const noexcept { return stdin_fd_; }
  int stdout_fd() const noexcept { return stdout_fd_; }
  int stderr_fd() const noexcept { return stderr_fd_; }

  /// Returns false if the child closed its end (EPIPE).
  bool write_all(std::span<const std::uint8_t> bytes);
  /// Reads until `out` is full, EOF, or `timeout_ms` passes without data
  /// (negative waits forever). Returns bytes read; sets *timed_out if given.
  std::size_t read_exact(std::span<std::uint8_t> out, int timeout_ms = -1, bool* timed_out = nullptr);
  void close_stdin();

  /// Waits for exit. Returns the exit code, or 128 + signal number.
  int wait();
  /// Waits up to `grace_ms` for exit, then kills. Returns the exit status.
  int wait_or_kill(int grace_ms);
  void kill() noexcept;
  bool exited() const noexcept { return pid_ <= 0; }

 private:
  void close_all() noexcept;

  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  int stderr_fd_ = -1;
  int status_ = 0;
};

struct CommandResult {
  int status = 0;
  std::vector<std::uint8_t> output;
  std::string diagnostics;  // captured stderr, truncated to a few KiB
};

/// Runs argv to completion feeding `input` on stdin and capturing both
/// output streams without deadlocking on full pipes.
CommandResult run_command(const std::vector<std::string>& argv,
                          std::span<const std::uint8_t> input = {});

}  // namespace slomo
