#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cosim/builder.hpp"
#include "cosim/engine.hpp"
#include "cosim/error.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

using namespace cosim;

namespace {

Model chain_constant_gain(double c, double k) {
  ModelBuilder mb;
  const BlockId a = mb.add(Constant{c});
  const BlockId b = mb.add(Gain{k});
  mb.connect(a, b);
  mb.expose_output(b);
  return std::move(mb).build();
}

bool traces_bit_identical(const Trace& a, const Trace& b) {
  if (a.times.size() != b.times.size() || a.columns != b.columns) return false;
  for (std::size_t r = 0; r < a.times.size(); ++r) {
    if (std::memcmp(&a.times[r], &b.times[r], sizeof(double)) != 0) return false;
    if (a.rows[r].size() != b.rows[r].size()) return false;
    for (std::size_t c = 0; c < a.rows[r].size(); ++c)
      if (std::memcmp(&a.rows[r][c], &b.rows[r][c], sizeof(double)) != 0) return false;
  }
  return true;
}

} // namespace

TEST_CASE("gain block multiplies") {
  const Model m = chain_constant_gain(2.0, 3.0);
  std::vector<double> state = m.initial_state();
  const auto out = eval_outputs(m, state, {}, 0.0, 0.1);
  CHECK(out == std::vector<double>{6.0});
}

TEST_CASE("integrator emits pre-update state") {
  ModelBuilder mb;
  const BlockId c = mb.add(Constant{1.0});
  const BlockId i = mb.add(Integrator{0.0});
  mb.connect(c, i);
  mb.expose_output(i);
  const Model m = std::move(mb).build();

  std::vector<double> state = m.initial_state();
  const auto out = eval_outputs(m, state, {}, 0.0, 0.1);
  CHECK(out[0] == 0.0);
  CHECK(state[0] == 0.1);
}

TEST_CASE("first-order lag matches its closed form over 1e4 steps") {
  // Exact-discretization recurrence s_{k+1} = a s_k + (1-a) K u with
  // a = exp(-dt/T); for K=1, T=1, s0=0, u=1 the closed form is
  // s_k = 1 - a^k = 1 - exp(-k dt).
  ModelBuilder mb;
  const BlockId c = mb.add(Constant{1.0});
  const BlockId f = mb.add(FirstOrderLag{1.0, 1.0, 0.0});
  mb.connect(c, f);
  mb.expose_output(f);
  const Model m = std::move(mb).build();

  const double dt = 0.01;
  const Trace tr = simulate(m, SimConfig{dt, 100.0, {}}); // 1e4 steps
  REQUIRE(tr.num_rows() == 10001);
  const double a = std::exp(-dt);
  for (std::size_t k = 0; k <= 10000; k += 7) {
    const double closed = 1.0 - std::pow(a, static_cast<double>(k));
    CHECK(std::fabs(tr.rows[k][0] - closed) <= 1e-12);
    // the spec's other route to the same value
    const double direct = 1.0 - std::exp(-static_cast<double>(k) * dt);
    CHECK(std::fabs(tr.rows[k][0] - direct) <= 1e-12);
  }
}

TEST_CASE("first-order lag closed form with nonzero initial state and gain") {
  // s_k = K (1 - a^k) u + a^k s0
  ModelBuilder mb;
  const BlockId c = mb.add(Constant{-2.5});
  const BlockId f = mb.add(FirstOrderLag{3.0, 0.4, 1.25});
  mb.connect(c, f);
  mb.expose_output(f);
  const Model m = std::move(mb).build();

  const double dt = 0.002;
  const double a = std::exp(-dt / 0.4);
  const Trace tr = simulate(m, SimConfig{dt, 8.0, {}});
  for (std::size_t k = 0; k < tr.num_rows(); k += 13) {
    const double ak = std::pow(a, static_cast<double>(k));
    const double closed = 3.0 * (1.0 - ak) * -2.5 + ak * 1.25;
    CHECK(std::fabs(tr.rows[k][0] - closed) <= 1e-12);
  }
}

TEST_CASE("empty model over a zero horizon records one row") {
  const Model m = validate_and_order({}, {}, {}, {});
  const Trace tr = simulate(m, SimConfig{0.1, 0.0, {}});
  CHECK(tr.num_rows() == 1);
  CHECK(tr.times[0] == 0.0);
  CHECK(tr.rows[0].empty());
}

TEST_CASE("step source switches strictly at t0") {
  ModelBuilder mb;
  const BlockId s = mb.add(Step{0.2, 0.0, 5.0});
  mb.expose_output(s);
  const Model m = std::move(mb).build();
  const Trace tr = simulate(m, SimConfig{0.1, 0.5, {}});
  REQUIRE(tr.num_rows() == 6);
  CHECK(tr.rows[0][0] == 0.0);
  CHECK(tr.rows[1][0] == 0.0);
  CHECK(tr.rows[2][0] == 5.0); // first row at t = 0.2
  CHECK(tr.rows[3][0] == 5.0);
}

TEST_CASE("constant into integrator, hand-unrolled") {
  // s_0 = 0, s_{k+1} = s_k + dt*1; row k emits s_k, so row k reads k*dt.
  ModelBuilder mb;
  const BlockId c = mb.add(Constant{1.0});
  const BlockId i = mb.add(Integrator{0.0});
  mb.connect(c, i);
  mb.expose_output(i);
  const Model m = std::move(mb).build();
  const Trace tr = simulate(m, SimConfig{0.1, 1.0, {}});
  REQUIRE(tr.num_rows() == 11);
  CHECK(std::fabs(tr.rows[9][0] - 0.9) <= 1e-12);
  CHECK(std::fabs(tr.rows[10][0] - 1.0) <= 1e-12);
}

TEST_CASE("simulate is deterministic") {
  ModelBuilder mb;
  const BlockId src = mb.add(Step{0.3, -1.0, 2.0});
  const BlockId lag = mb.add(FirstOrderLag{1.7, 0.3, 0.2});
  const BlockId integ = mb.add(Integrator{-0.5});
  const BlockId sum = mb.add(Sum{{1, -1}});
  const BlockId sine = mb.add(Sine{});
  mb.connect(src, lag);
  mb.connect(lag, sum, 0);
  mb.connect(integ, sum, 1);
  mb.connect(sum, sine);
  mb.connect(sine, integ);
  mb.expose_output(sine);
  mb.expose_output(integ);
  const Model m = std::move(mb).build();

  const SimConfig cfg{1e-3, 2.0, {}};
  CHECK(traces_bit_identical(simulate(m, cfg), simulate(m, cfg)));
}

TEST_CASE("external inputs feed exposed ports") {
  ModelBuilder mb;
  const BlockId e = mb.add(External{0});
  const BlockId g = mb.add(Gain{10.0});
  mb.connect(e, g);
  mb.expose_input(e);
  mb.expose_output(g);
  const Model m = std::move(mb).build();

  const Trace tr = simulate(m, SimConfig{0.5, 1.0, {}},
                            [](double t) { return std::vector<double>{t + 1.0}; });
  CHECK(tr.rows[0][0] == 10.0);
  CHECK(tr.rows[1][0] == 15.0);
  CHECK(tr.rows[2][0] == 20.0);
}

TEST_CASE("linearity in sources for memoryful linear models") {
  // Scaling all sources (external inputs and constants) scales every output;
  // initial states are zero. Limiter/Sine/Product/Step would break this and
  // are excluded.
  std::mt19937 rng(917);
  std::uniform_real_distribution<double> val(-3.0, 3.0);

  for (int iter = 0; iter < 40; ++iter) {
    ModelBuilder base, scaled;
    const double alpha = 2.5;
    const std::size_t n_src = 1 + rng() % 2;

    std::vector<BlockId> nodes_base, nodes_scaled;
    for (std::size_t s = 0; s < n_src; ++s) {
      const double v = val(rng);
      nodes_base.push_back(base.add(Constant{v}));
      nodes_scaled.push_back(scaled.add(Constant{alpha * v}));
    }
    const std::size_t n_more = 2 + rng() % 5;
    for (std::size_t j = 0; j < n_more; ++j) {
      const int pick = static_cast<int>(rng() % 4);
      BlockKind kind;
      switch (pick) {
      case 0: kind = Gain{val(rng)}; break;
      case 1: kind = Sum{{1, -1}}; break;
      case 2: kind = Integrator{0.0}; break;
      default: kind = FirstOrderLag{val(rng), 0.5, 0.0}; break;
      }
      const BlockId b = base.add(kind);
      const BlockId c = scaled.add(kind);
      REQUIRE(b == c);
      std::uniform_int_distribution<std::size_t> src_dist(0, nodes_base.size() - 1);
      for (std::size_t p = 0; p < arity(kind); ++p) {
        const std::size_t s = src_dist(rng);
        base.connect(nodes_base[s], b, static_cast<std::uint32_t>(p));
        scaled.connect(nodes_scaled[s], c, static_cast<std::uint32_t>(p));
      }
      nodes_base.push_back(b);
      nodes_scaled.push_back(c);
    }
    base.expose_output(nodes_base.back());
    scaled.expose_output(nodes_scaled.back());

    const SimConfig cfg{0.01, 1.0, {}};
    const Trace ta = simulate(base.build(), cfg);
    const Trace tb = simulate(scaled.build(), cfg);
    for (std::size_t k = 0; k < ta.num_rows(); ++k)
      CHECK(std::fabs(alpha * ta.rows[k][0] - tb.rows[k][0]) <=
            1e-12 * std::max(1.0, std::fabs(tb.rows[k][0])));
  }
}

TEST_CASE("limiter clamp is idempotent across extreme magnitudes") {
  const double lo = -2.0, hi = 3.0;
  auto clamp = [&](double u) { return u < lo ? lo : (u > hi ? hi : u); };
  const double probes[] = {-std::numeric_limits<double>::max(),
                           -1e308,
                           -2.0000000000000004,
                           -2.0,
                           0.0,
                           2.9999999999999996,
                           3.0,
                           1e308,
                           std::numeric_limits<double>::max()};
  for (double u : probes) {
    const double once = clamp(u);
    CHECK(clamp(once) == once);
    CHECK(once >= lo);
    CHECK(once <= hi);
  }

  ModelBuilder mb;
  const BlockId c = mb.add(Constant{1e308});
  const BlockId l1 = mb.add(Limiter{lo, hi});
  const BlockId l2 = mb.add(Limiter{lo, hi});
  mb.connect(c, l1);
  mb.connect(l1, l2);
  mb.expose_output(l1);
  mb.expose_output(l2);
  const Model m = std::move(mb).build();
  std::vector<double> state;
  const auto out = eval_outputs(m, state, {}, 0.0, 0.1);
  CHECK(out[0] == out[1]);
  CHECK(out[0] == hi);
}

TEST_CASE("non-finite signals are reported with block and step") {
  ModelBuilder mb;
  const BlockId c = mb.add(Constant{1e308});
  const BlockId g = mb.add(Gain{1e308});
  mb.connect(c, g);
  mb.expose_output(g);
  const Model m = std::move(mb).build();
  try {
    simulate(m, SimConfig{0.1, 1.0, {}});
    FAIL("expected NonFiniteSignal");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteSignal);
    CHECK(e.message().find("block 1") != std::string::npos);
    CHECK(e.message().find("step 0") != std::string::npos);
  }
}

TEST_CASE("recorded subset selects output columns") {
  ModelBuilder mb;
  const BlockId a = mb.add(Constant{1.0});
  const BlockId b = mb.add(Constant{2.0});
  mb.expose_output(a, "a");
  mb.expose_output(b, "b");
  const Model m = std::move(mb).build();
  const Trace tr = simulate(m, SimConfig{0.1, 0.0, {1}});
  CHECK(tr.columns == std::vector<std::string>{"b"});
  CHECK(tr.rows[0] == std::vector<double>{2.0});
}

TEST_CASE("feedback through a memory block matches the hand recurrence") {
  // sum_k = 0.5*s_k + 1, s_{k+1} = s_k + dt*sum_k. The gain/sum pair is
  // evaluated from seeded integrator state regardless of eval order.
  ModelBuilder mb;
  const BlockId s = mb.add(Sum{{1, 1}});
  const BlockId i = mb.add(Integrator{0.0});
  const BlockId g = mb.add(Gain{0.5});
  const BlockId c = mb.add(Constant{1.0});
  mb.connect(s, i);
  mb.connect(i, g);
  mb.connect(g, s, 0);
  mb.connect(c, s, 1);
  mb.expose_output(s, "sum");
  mb.expose_output(i, "state");
  const Model m = std::move(mb).build();

  const double dt = 0.125;
  const Trace tr = simulate(m, SimConfig{dt, 2.0, {}});
  double sk = 0.0;
  for (std::size_t k = 0; k < tr.num_rows(); ++k) {
    const double sum_k = 0.5 * sk + 1.0;
    CHECK(tr.rows[k][0] == sum_k);
    CHECK(tr.rows[k][1] == sk);
    sk = sk + dt * sum_k;
  }
}
