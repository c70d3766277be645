#pragma once

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cosim {

/// Spawned child with explicit supervision. Exit codes follow the shell
/// convention: normal exit 0..255, death by signal reported as 128+signo.
class ChildProcess {
public:
  struct Options {
    std::filesystem::path stdout_to; // empty = inherit
    std::filesystem::path stderr_to; // empty = inherit
  };

  /// argv[0] is the executable path. Throws SpawnFailure.
  static ChildProcess spawn(const std::vector<std::string>& argv, const Options& options = {});

  ChildProcess() = default;
  ~ChildProcess();
  ChildProcess(ChildProcess&& other) noexcept;
  ChildProcess& operator=(ChildProcess&& other) noexcept;
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  pid_t pid() const { return pid_; }
  bool joined() const { return pid_ < 0; }

  /// Non-blocking reap; exit code if the child has finished.
  std::optional<int> try_wait();

  /// Polls until the child exits or the deadline passes.
  std::optional<int> wait_for(std::chrono::milliseconds timeout);

  /// Blocks until exit.
  int wait();

  void kill(int signal) noexcept;

  /// SIGKILL (if still running) and reap. Used by the destructor.
  void terminate() noexcept;

private:
  pid_t pid_ = -1;
};

} // namespace cosim
