#include "cosim/process.hpp"

#include "cosim/error.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

extern char** environ;

namespace cosim {

namespace {

int decode_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

} // namespace

ChildProcess ChildProcess::spawn(const std::vector<std::string>& argv, const Options& options) {
  if (argv.empty()) throw Error(ErrorCode::SpawnFailure, "empty argv");

  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const std::string& a : argv)
    cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  if (!options.stdout_to.empty())
    posix_spawn_file_actions_addopen(&actions, 1, options.stdout_to.c_str(),
                                     O_WRONLY | O_CREAT | O_TRUNC, 0600);
  if (!options.stderr_to.empty())
    posix_spawn_file_actions_addopen(&actions, 2, options.stderr_to.c_str(),
                                     O_WRONLY | O_CREAT | O_TRUNC, 0600);

  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, argv[0].c_str(), &actions, nullptr, cargv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0)
    throw Error(ErrorCode::SpawnFailure, "cannot spawn '" + argv[0] + "': " + std::strerror(rc));

  ChildProcess child;
  child.pid_ = pid;
  return child;
}

ChildProcess::~ChildProcess() { terminate(); }

ChildProcess::ChildProcess(ChildProcess&& other) noexcept { *this = std::move(other); }

ChildProcess& ChildProcess::operator=(ChildProcess&& other) noexcept {
  if (this != &other) {
    terminate();
    pid_ = other.pid_;
    other.pid_ = -1;
  }
  return *this;
}

std::optional<int> ChildProcess::try_wait() {
  if (pid_ < 0) return std::nullopt;
  int status = 0;
  const pid_t r = ::waitpid(pid_, &status, WNOHANG);
  if (r == 0) return std::nullopt;
  pid_ = -1;
  if (r < 0) return -1;
  return decode_status(status);
}

std::optional<int> ChildProcess::wait_for(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto code = try_wait()) return code;
    if (pid_ < 0) return std::nullopt;
    if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
}

int ChildProcess::wait() {
  if (pid_ < 0) return -1;
  int status = 0;
  const pid_t r = ::waitpid(pid_, &status, 0);
  pid_ = -1;
  return r < 0 ? -1 : decode_status(status);
}

void ChildProcess::kill(int signal) noexcept {
  if (pid_ > 0) ::kill(pid_, signal);
}

void ChildProcess::terminate() noexcept {
  if (pid_ < 0) return;
  ::kill(pid_, SIGKILL);
  int status = 0;
  ::waitpid(pid_, &status, 0);
  pid_ = -1;
}

} // namespace cosim
