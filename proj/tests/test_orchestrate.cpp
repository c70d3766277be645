#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cosim/builder.hpp"
#include "cosim/engine.hpp"
#include "cosim/error.hpp"
#include "cosim/model_json.hpp"
#include "cosim/orchestrate.hpp"
#include "cosim/process.hpp"
#include "cosim/split.hpp"

#include <signal.h>
#include <stdlib.h>
#include <unistd.h>

#include <cstring>
#include <random>

using namespace cosim;
using namespace std::chrono_literals;

namespace {

CosimOptions test_options() {
  CosimOptions opts;
  opts.follower_binary = COSIM_BIN;
  opts.channel.timeout = 3000ms;
  return opts;
}

bool bit_identical(const Trace& a, const Trace& b) {
  if (a.num_rows() != b.num_rows() || a.num_columns() != b.num_columns() || a.columns != b.columns)
    return false;
  for (std::size_t r = 0; r < a.num_rows(); ++r) {
    if (std::memcmp(&a.times[r], &b.times[r], 8) != 0) return false;
    for (std::size_t c = 0; c < a.num_columns(); ++c)
      if (std::memcmp(&a.rows[r][c], &b.rows[r][c], 8) != 0) return false;
  }
  return true;
}

Model chain_model() {
  ModelBuilder mb;
  const BlockId c = mb.add(Constant{1.5});
  const BlockId g = mb.add(Gain{2.0});
  const BlockId lag = mb.add(FirstOrderLag{1.0, 0.5, 0.0});
  mb.connect(c, g);
  mb.connect(g, lag);
  mb.expose_output(lag, "y");
  return std::move(mb).build();
}

Model random_model(std::mt19937& rng, std::size_t n) {
  std::vector<Block> blocks;
  std::uniform_real_distribution<double> val(-2.0, 2.0);
  for (std::size_t b = 0; b < n; ++b) {
    BlockKind kind;
    switch (b == 0 ? rng() % 2 : rng() % 10) {
    case 0: kind = Constant{val(rng)}; break;
    case 1: kind = Step{0.3, val(rng), val(rng)}; break;
    case 2: kind = Gain{val(rng)}; break;
    case 3: kind = Sum{{1, -1}}; break;
    case 4: kind = Limiter{-1.5, 1.5}; break;
    case 5: kind = Integrator{val(rng)}; break;
    case 6: kind = FirstOrderLag{1.0, 0.5, val(rng)}; break;
    case 7: kind = UnitDelay{val(rng)}; break;
    case 8: kind = Sine{}; break;
    default: kind = Product{}; break;
    }
    blocks.push_back({static_cast<BlockId>(b), kind});
  }
  std::vector<BlockId> memory_ids;
  for (const Block& b : blocks)
    if (is_memory_kind(b.kind)) memory_ids.push_back(b.id);

  std::vector<Wire> wires;
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < arity(blocks[b].kind); ++p) {
      BlockId src;
      if (!memory_ids.empty() && rng() % 3 == 0)
        src = memory_ids[rng() % memory_ids.size()];
      else
        src = static_cast<BlockId>(rng() % b);
      wires.push_back(Wire{{src, 0}, {static_cast<BlockId>(b), static_cast<std::uint32_t>(p)}});
    }

  std::vector<OutputSpec> outputs;
  for (std::size_t i = 0; i < 1 + rng() % 3; ++i)
    outputs.push_back(OutputSpec{{static_cast<BlockId>(rng() % n), 0}, "y" + std::to_string(i)});
  return validate_and_order(std::move(blocks), std::move(wires), {}, std::move(outputs));
}

} // namespace

TEST_CASE("trivial chain co-simulates and reports its stats") {
  const Model m = chain_model();
  const CutSet cut{{{1, CutDirection::MasterToFollower}}}; // gain -> lag
  const SimConfig cfg{0.01, 0.5, {}};

  auto [trace, stats] = run_cosim(m, cut, cfg, test_options());
  CHECK(stats.role == RunStats::Role::Master);
  CHECK(stats.steps == 50);
  CHECK(stats.exchanges == 51);
  CHECK(trace.num_rows() == 51);

  const Trace oracle = simulate(reference_with_delays(m, cut), cfg);
  CHECK(bit_identical(trace, oracle));
}

TEST_CASE("zero horizon records one row through one exchange") {
  const Model m = chain_model();
  const CutSet cut{{{1, CutDirection::MasterToFollower}}};
  auto [trace, stats] = run_cosim(m, cut, SimConfig{0.01, 0.0, {}}, test_options());
  CHECK(trace.num_rows() == 1);
  CHECK(stats.steps == 0);
  CHECK(stats.exchanges == 1);
}

TEST_CASE("step-0 master evaluation sees all-zero follower signals") {
  ModelBuilder mb;
  const BlockId c = mb.add(Constant{7.0});
  const BlockId g = mb.add(Gain{1.0});
  const std::uint32_t w = mb.connect(c, g);
  mb.expose_output(g, "y");
  const Model m = std::move(mb).build();

  const CutSet cut{{{w, CutDirection::FollowerToMaster}}};
  auto [trace, stats] = run_cosim(m, cut, SimConfig{0.1, 0.3, {}}, test_options());
  (void)stats;
  CHECK(trace.rows[0][0] == 0.0); // zero-initialized segment, not 7
  CHECK(trace.rows[1][0] == 7.0);
  CHECK(trace.rows[2][0] == 7.0);
}

TEST_CASE("randomized process co-simulation equals the delay oracle") {
  std::mt19937 rng(0xB0B);
  const SimConfig cfg{0.05, 1.0, {}};
  int exercised = 0;

  while (exercised < 8) {
    const Model m = random_model(rng, 3 + rng() % 8);
    std::vector<bool> follower(m.num_blocks(), false);
    std::size_t f_count = 0;
    for (std::size_t b = 0; b < m.num_blocks(); ++b)
      if (rng() % 2) {
        follower[b] = true;
        ++f_count;
      }
    if (f_count == 0 || f_count == m.num_blocks()) continue;
    CutSet cut;
    for (std::size_t w = 0; w < m.wires().size(); ++w) {
      const Wire& wire = m.wires()[w];
      if (follower[wire.src.block] == follower[wire.dst.block]) continue;
      cut.wires.push_back({static_cast<std::uint32_t>(w), follower[wire.src.block]
                                                              ? CutDirection::FollowerToMaster
                                                              : CutDirection::MasterToFollower});
    }
    if (cut.wires.empty()) continue;

    auto [trace, stats] = run_cosim(m, cut, cfg, test_options());
    (void)stats;
    REQUIRE(bit_identical(trace, simulate(reference_with_delays(m, cut), cfg)));
    ++exercised;
  }
}

TEST_CASE("killed follower process times out at the pending step") {
  const Model m = chain_model();
  SplitPlan plan = split(m, CutSet{{{1, CutDirection::MasterToFollower}}}, "cosim.kill." +
                                                                               std::to_string(::getpid()));
  const auto payload_path =
      std::filesystem::temp_directory_path() / ("kill_follower_" + std::to_string(::getpid()) + ".json");
  save_model(plan.follower_model, payload_path);

  ChannelConfig cfg;
  cfg.timeout = 400ms;
  Channel ch = Channel::create_master(plan.channel_name, plan.n_m2f, plan.n_f2m, cfg);
  ChildProcess child = ChildProcess::spawn({COSIM_BIN, "--role", "follower", "--channel",
                                            plan.channel_name, "--model", payload_path.string(),
                                            "--dt", "0.01", "--t-end", "100"});

  const std::vector<double> payload{1.0};
  for (std::uint32_t k = 1; k <= 10; ++k)
    CHECK(ch.exchange(k, 0.0, payload).size() == plan.n_f2m);

  child.kill(SIGKILL);
  child.wait();
  try {
    ch.exchange(11, 0.0, payload);
    FAIL("expected Timeout");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Timeout);
  }
  std::filesystem::remove(payload_path);
}

TEST_CASE("follower NaN aborts and surfaces with diagnostics") {
  ModelBuilder mb;
  const BlockId c = mb.add(Constant{1.0});
  const BlockId g1 = mb.add(Gain{1e300});
  const BlockId g2 = mb.add(Gain{1e300});
  const std::uint32_t w = mb.connect(c, g1);
  mb.connect(g1, g2);
  mb.expose_output(g2, "y");
  const Model m = std::move(mb).build();

  try {
    run_cosim(m, CutSet{{{w, CutDirection::MasterToFollower}}}, SimConfig{0.01, 1.0, {}},
              test_options());
    FAIL("expected AbortReceived");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AbortReceived);
    CHECK(e.message().find("co-sim step 1") != std::string::npos);
    CHECK(e.message().find("follower said") != std::string::npos);
  }
}

TEST_CASE("a bad follower binary is a spawn failure") {
  ::setenv("COSIM_FOLLOWER_BIN", "/nonexistent/cosim-follower", 1);
  const Model m = chain_model();
  try {
    run_cosim(m, CutSet{{{1, CutDirection::MasterToFollower}}}, SimConfig{0.01, 0.1, {}},
              test_options());
    FAIL("expected SpawnFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SpawnFailure);
  }
  ::unsetenv("COSIM_FOLLOWER_BIN");
}

TEST_CASE("carried follower-side outputs keep their column order") {
  // outputs alternate master/follower sides; the trace must keep y0..y2
  ModelBuilder mb;
  const BlockId c = mb.add(Constant{2.0});
  const BlockId gm = mb.add(Gain{3.0});  // master
  const BlockId gf = mb.add(Gain{-1.0}); // follower
  const std::uint32_t w_cf = mb.connect(c, gf);
  mb.connect(c, gm);
  mb.expose_output(gm, "y0");
  mb.expose_output(gf, "y1");
  mb.expose_output(c, "y2");
  const Model m = std::move(mb).build();

  const CutSet cut{{{w_cf, CutDirection::MasterToFollower}}};
  auto [trace, stats] = run_cosim(m, cut, SimConfig{0.1, 0.3, {}}, test_options());
  (void)stats;
  CHECK(trace.columns == std::vector<std::string>{"y0", "y1", "y2"});
  CHECK(bit_identical(trace, simulate(reference_with_delays(m, cut), SimConfig{0.1, 0.3, {}})));
  // follower value is the same-step evaluation, one step behind on the cut
  CHECK(trace.rows[0][1] == 0.0);  // gf saw zeros at exchange 0
  CHECK(trace.rows[1][1] == -2.0);
  CHECK(trace.rows[0][0] == 6.0);  // master side is undelayed
}
