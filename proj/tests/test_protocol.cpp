#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cosim/error.hpp"
#include "cosim/shm.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <chrono>
#include <cstring>
#include <functional>
#include <random>

using namespace cosim;
using namespace std::chrono_literals;

namespace {

std::string unique_name(const std::string& stem) {
  static int seq = 0;
  return "cosim.proto." + stem + "." + std::to_string(::getpid()) + "." + std::to_string(seq++);
}

ChannelConfig fast_config(std::chrono::milliseconds timeout = 2000ms) {
  ChannelConfig cfg;
  cfg.timeout = timeout;
  return cfg;
}

// Children run outside doctest: they must _exit and never unwind into the
// test framework.
pid_t fork_child(const std::function<int()>& body) {
  const pid_t pid = ::fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    int rc = 1;
    try {
      rc = body();
    } catch (...) {
      rc = 99;
    }
    ::_exit(rc);
  }
  return pid;
}

int join_child(pid_t pid) {
  int status = 0;
  REQUIRE(::waitpid(pid, &status, 0) == pid);
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

int serve_echo(const std::string& name, const ChannelConfig& cfg) {
  Channel ch = Channel::open_follower(name, cfg);
  ch.serve([&](const ExchangeRecord& rec, std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = rec.inputs[i];
  });
  return 0;
}

} // namespace

TEST_CASE("echo round trips are bit exact with monotonic steps") {
  const std::string name = unique_name("integrity");
  Channel master = Channel::create_master(name, 8, 4, fast_config());
  const pid_t child = fork_child([&] { return serve_echo(name, fast_config()); });

  std::mt19937_64 rng(0xC051Du);
  std::vector<double> payload(8);
  const std::size_t kSteps = 10000;
  std::chrono::nanoseconds worst{0};

  for (std::size_t k = 1; k <= kSteps; ++k) {
    for (double& v : payload) {
      const double x = std::bit_cast<double>(rng());
      v = std::isfinite(x) ? x : static_cast<double>(rng()) / 1e3;
    }
    const ExchangeFlag before = master.flag();
    REQUIRE((before == ExchangeFlag::Idle || before == ExchangeFlag::OutputsReady));

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> reply =
        master.exchange(static_cast<std::uint32_t>(k), static_cast<double>(k) * 1e-3, payload);
    worst = std::max(worst, std::chrono::steady_clock::now() - t0);

    REQUIRE(reply.size() == 4);
    for (std::size_t i = 0; i < 4; ++i)
      REQUIRE(std::memcmp(&reply[i], &payload[i], 8) == 0);
    REQUIRE(master.step() == k);
    REQUIRE(master.flag() == ExchangeFlag::OutputsReady);
  }

  // liveness: with both sides healthy no exchange came near the timeout
  CHECK(worst < fast_config().timeout / 2);

  master.close();
  CHECK(join_child(child) == 0);
}

TEST_CASE("shutdown before the first exchange serves zero steps") {
  const std::string name = unique_name("earlyshutdown");
  Channel master = Channel::create_master(name, 1, 1, fast_config());

  int ready_pipe[2];
  REQUIRE(::pipe(ready_pipe) == 0);
  const pid_t child = fork_child([&] {
    ::close(ready_pipe[0]);
    Channel ch = Channel::open_follower(name, fast_config());
    char byte = 'r';
    if (::write(ready_pipe[1], &byte, 1) != 1) return 98;
    ::close(ready_pipe[1]);
    const std::size_t served = ch.serve([](const ExchangeRecord&, std::span<double>) {});
    return served == 0 ? 42 : 41;
  });
  ::close(ready_pipe[1]);
  char byte = 0;
  REQUIRE(::read(ready_pipe[0], &byte, 1) == 1);
  ::close(ready_pipe[0]);

  master.close();
  CHECK(join_child(child) == 42);
}

TEST_CASE("handler failure aborts the exchange in flight") {
  const std::string name = unique_name("throwing");
  Channel master = Channel::create_master(name, 1, 1, fast_config());
  const pid_t child = fork_child([&] {
    Channel ch = Channel::open_follower(name, fast_config());
    try {
      ch.serve([](const ExchangeRecord& rec, std::span<double> out) {
        if (rec.step == 3) throw std::runtime_error("synthetic failure");
        out[0] = rec.inputs[0];
      });
    } catch (const Error& e) {
      return e.code() == ErrorCode::HandlerFailure ? 3 : 98;
    }
    return 97;
  });

  const std::vector<double> v{1.0};
  CHECK(master.exchange(1, 0.0, v) == v);
  CHECK(master.exchange(2, 0.001, v) == v);
  try {
    master.exchange(3, 0.002, v);
    FAIL("expected AbortReceived");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AbortReceived);
  }
  CHECK(join_child(child) == 3);
}

TEST_CASE("killed follower surfaces as a master timeout") {
  const std::string name = unique_name("killfollower");
  Channel master = Channel::create_master(name, 1, 1, fast_config(600ms));
  const pid_t child = fork_child([&] { return serve_echo(name, fast_config(600ms)); });

  const std::vector<double> v{7.0};
  for (std::uint32_t k = 1; k <= 5; ++k)
    REQUIRE(master.exchange(k, 0.0, v) == v);

  ::kill(child, SIGKILL);
  CHECK(join_child(child) == 128 + SIGKILL);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    master.exchange(6, 0.0, v);
    FAIL("expected Timeout");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Timeout);
  }
  CHECK(std::chrono::steady_clock::now() - t0 < 5s);
}

TEST_CASE("killed master surfaces as a follower timeout") {
  const std::string name = unique_name("killmaster");
  const pid_t child = fork_child([&]() -> int {
    Channel master = Channel::create_master(name, 1, 1, fast_config());
    std::vector<double> v{0.0};
    for (std::uint32_t k = 1;; ++k) {
      v[0] = static_cast<double>(k);
      master.exchange(k, 0.0, v);
    }
  });

  Channel follower = Channel::open_follower(name, fast_config(600ms));
  std::size_t count = 0;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    follower.serve([&](const ExchangeRecord&, std::span<double> out) {
      out[0] = 0.0;
      if (++count == 5) ::kill(child, SIGKILL);
    });
    FAIL("expected Timeout");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Timeout);
  }
  CHECK(count >= 5);
  CHECK(std::chrono::steady_clock::now() - t0 < 5s);
  CHECK(join_child(child) == 128 + SIGKILL);
}

TEST_CASE("a dead owner's segment is reclaimed") {
  const std::string name = unique_name("stale");
  const pid_t child = fork_child([&] {
    Channel ch = Channel::create_master(name, 4, 2, fast_config());
    ch.abort(); // leave a non-idle flag behind
    return 0;   // _exit without close: name survives, flock dies with us
  });
  CHECK(join_child(child) == 0);

  Channel reclaimed = Channel::create_master(name, 1, 1, fast_config());
  CHECK(reclaimed.flag() == ExchangeFlag::Idle);
  CHECK(reclaimed.step() == 0);
  CHECK(reclaimed.n_inputs() == 1);
}

TEST_CASE("max-capacity payloads round trip bit exactly") {
  using wire_layout::kMaxInputs;
  using wire_layout::kMaxOutputs;
  const std::string name = unique_name("maxcap");
  Channel master = Channel::create_master(name, kMaxInputs, kMaxOutputs, fast_config());
  const pid_t child = fork_child([&] { return serve_echo(name, fast_config()); });

  std::mt19937_64 rng(0xFEED);
  std::vector<double> payload(kMaxInputs);
  for (std::uint32_t k = 1; k <= 50; ++k) {
    for (double& v : payload) {
      const double x = std::bit_cast<double>(rng());
      v = std::isfinite(x) ? x : static_cast<double>(rng());
    }
    const std::vector<double> reply = master.exchange(k, 0.0, payload);
    REQUIRE(reply.size() == kMaxOutputs);
    REQUIRE(std::memcmp(reply.data(), payload.data(), kMaxOutputs * 8) == 0);
  }
  master.close();
  CHECK(join_child(child) == 0);
}
