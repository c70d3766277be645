#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace cosim {

using BlockId = std::uint32_t;

// Block palette. Every kind has exactly one output. Integrator, FirstOrderLag
// and UnitDelay are the memory blocks: their output at a step depends only on
// internal state, never on the current input, which is what lets them break
// feedback cycles. Extending the palette means adding a variant alternative
// and teaching arity(), is_memory_kind(), the evaluator and the JSON codec
// about it.

struct Constant {
  double value = 0.0;

  friend bool operator==(const Constant&, const Constant&) = default;
};

struct Gain {
  double k = 1.0;

  friend bool operator==(const Gain&, const Gain&) = default;
};

/// Signed sum: output = sum_i signs[i] * u_i. Signs are +1/-1.
struct Sum {
  std::vector<int> signs;

  friend bool operator==(const Sum&, const Sum&) = default;
};

struct Limiter {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const Limiter&, const Limiter&) = default;
};

/// Time source: output = before while t < t0 (strict), after from t0 on.
struct Step {
  double t0 = 0.0;
  double before = 0.0;
  double after = 0.0;

  friend bool operator==(const Step&, const Step&) = default;
};

/// Forward-Euler integrator: output = state, next state = state + dt*u.
struct Integrator {
  double initial = 0.0;

  friend bool operator==(const Integrator&, const Integrator&) = default;
};

/// Exact zero-order-hold first-order lag: output = state,
/// next state = a*state + (1-a)*gain*u with a = exp(-dt/time_constant).
struct FirstOrderLag {
  double gain = 1.0;
  double time_constant = 1.0;
  double initial = 0.0;

  friend bool operator==(const FirstOrderLag&, const FirstOrderLag&) = default;
};

/// One-step delay: output = state, next state = u.
struct UnitDelay {
  double initial = 0.0;

  friend bool operator==(const UnitDelay&, const UnitDelay&) = default;
};

struct Sine {
  friend bool operator==(const Sine&, const Sine&) = default;
};

/// output = u0 * u1
struct Product {
  friend bool operator==(const Product&, const Product&) = default;
};

/// Boundary placeholder: an identity block whose single input port is left
/// unwired and exposed as a model-level input. The orchestrator feeds it per
/// step; slot is its index in the exchange array.
struct External {
  std::uint32_t slot = 0;

  friend bool operator==(const External&, const External&) = default;
};

using BlockKind = std::variant<Constant, Gain, Sum, Limiter, Step, Integrator, FirstOrderLag,
                               UnitDelay, Sine, Product, External>;

struct Block {
  BlockId id = 0;
  BlockKind kind;

  friend bool operator==(const Block&, const Block&) = default;
};

/// Number of input ports a kind consumes.
std::size_t arity(const BlockKind& kind);

/// True for kinds whose current output is independent of the current input.
bool is_memory_kind(const BlockKind& kind);

/// Short lowercase tag ("gain", "sum", ...) used in JSON and diagnostics.
const char* kind_name(const BlockKind& kind);

struct PortRef {
  BlockId block = 0;
  std::uint32_t port = 0;

  friend bool operator==(const PortRef&, const PortRef&) = default;
};

/// Directed connection from src block's output port to dst block's input port.
struct Wire {
  PortRef src;
  PortRef dst;

  friend bool operator==(const Wire&, const Wire&) = default;
};

struct OutputSpec {
  PortRef port;
  std::string name;
};

} // namespace cosim
