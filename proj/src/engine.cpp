#include "cosim/engine.hpp"

#include "cosim/error.hpp"

#include <cmath>
#include <string>

namespace cosim {

namespace {

template <class... Ts> struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts> Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void throw_non_finite(const Model& model, BlockId b, double t, const char* what) {
  throw Error(ErrorCode::NonFiniteSignal, std::string(what) + " of block " + std::to_string(b) + " (" +
                                              kind_name(model.blocks()[b].kind) +
                                              ") became non-finite at t=" + std::to_string(t));
}

} // namespace

std::size_t num_steps(const SimConfig& config) {
  if (!(config.dt > 0.0) || !std::isfinite(config.dt))
    throw Error(ErrorCode::InvalidModel, "dt must be positive and finite");
  if (config.t_end < 0.0 || !std::isfinite(config.t_end))
    throw Error(ErrorCode::InvalidModel, "t_end must be non-negative and finite");
  const double steps = std::round(config.t_end / config.dt);
  if (!(steps >= 0.0) || steps > 1e15)
    throw Error(ErrorCode::InvalidModel, "step count out of range");
  return static_cast<std::size_t>(steps);
}

void eval_step(const Model& model, std::vector<double>& state, std::span<const double> external_inputs,
               double t, double dt, std::span<double> signals) {
  if (external_inputs.size() != model.inputs().size())
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(model.inputs().size()) +
                                              " external inputs, got " +
                                              std::to_string(external_inputs.size()));
  if (signals.size() != model.num_blocks())
    throw Error(ErrorCode::ShapeMismatch, "signal buffer size mismatch");
  if (state.size() != model.num_states())
    throw Error(ErrorCode::ShapeMismatch, "state vector size mismatch");

  auto input_of = [&](BlockId b, std::uint32_t p) {
    const PortDriver& d = model.driver(b, p);
    return d.is_wire() ? signals[model.wires()[d.wire].src.block] : external_inputs[d.external];
  };

  // Memory-block outputs are pre-update state, known before anything else
  // runs; seeding them first is what lets eval_order place such a block
  // after its consumers.
  for (const Block& blk : model.blocks())
    if (model.state_slot(blk.id) != Model::kNoState) signals[blk.id] = state[model.state_slot(blk.id)];

  // Pass 1: every block's output at t.
  for (const BlockId b : model.eval_order()) {
    const double out = std::visit(
        Overloaded{
            [&](const Constant& k) { return k.value; },
            [&](const Gain& k) { return k.k * input_of(b, 0); },
            [&](const Sum& k) {
              double acc = 0.0;
              for (std::size_t p = 0; p < k.signs.size(); ++p) {
                const double u = input_of(b, static_cast<std::uint32_t>(p));
                acc = k.signs[p] > 0 ? acc + u : acc - u;
              }
              return acc;
            },
            [&](const Limiter& k) {
              const double u = input_of(b, 0);
              return u < k.lo ? k.lo : (u > k.hi ? k.hi : u);
            },
            [&](const Step& k) { return t < k.t0 ? k.before : k.after; },
            [&](const Integrator&) { return state[model.state_slot(b)]; },
            [&](const FirstOrderLag&) { return state[model.state_slot(b)]; },
            [&](const UnitDelay&) { return state[model.state_slot(b)]; },
            [&](const Sine&) { return std::sin(input_of(b, 0)); },
            [&](const Product&) { return input_of(b, 0) * input_of(b, 1); },
            [&](const External&) { return input_of(b, 0); },
        },
        model.blocks()[b].kind);
    if (!std::isfinite(out)) throw_non_finite(model, b, t, "output");
    signals[b] = out;
  }

  // Pass 2: advance memory-block state from the now-complete signal image.
  for (const Block& blk : model.blocks()) {
    const std::uint32_t slot = model.state_slot(blk.id);
    if (slot == Model::kNoState) continue;
    const double u = input_of(blk.id, 0);
    double& s = state[slot];
    if (const auto* f = std::get_if<FirstOrderLag>(&blk.kind)) {
      const double a = std::exp(-dt / f->time_constant);
      s = a * s + (1.0 - a) * f->gain * u;
    } else if (std::holds_alternative<Integrator>(blk.kind)) {
      s = s + dt * u;
    } else { // UnitDelay
      s = u;
    }
    if (!std::isfinite(s)) throw_non_finite(model, blk.id, t, "state");
  }
}

std::vector<double> eval_outputs(const Model& model, std::vector<double>& state,
                                 std::span<const double> external_inputs, double t, double dt) {
  std::vector<double> signals(model.num_blocks());
  eval_step(model, state, external_inputs, t, dt, signals);
  std::vector<double> out;
  out.reserve(model.outputs().size());
  for (const OutputSpec& o : model.outputs())
    out.push_back(signals[o.port.block]);
  return out;
}

Trace simulate(const Model& model, const SimConfig& config, const InputFn& input_fn) {
  const std::size_t steps = num_steps(config);

  std::vector<std::size_t> recorded = config.recorded;
  if (recorded.empty()) {
    recorded.resize(model.outputs().size());
    for (std::size_t i = 0; i < recorded.size(); ++i)
      recorded[i] = i;
  }
  for (std::size_t idx : recorded)
    if (idx >= model.outputs().size())
      throw Error(ErrorCode::InvalidModel, "recorded output index " + std::to_string(idx) +
                                               " out of range");

  Trace trace;
  trace.dt = config.dt;
  for (std::size_t idx : recorded)
    trace.columns.push_back(model.outputs()[idx].name);
  trace.times.reserve(steps + 1);
  trace.rows.reserve(steps + 1);

  std::vector<double> state = model.initial_state();
  std::vector<double> signals(model.num_blocks());
  const std::vector<double> no_inputs;

  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * config.dt;
    const std::vector<double>& ext = input_fn ? input_fn(t) : no_inputs;
    try {
      eval_step(model, state, ext, t, config.dt, signals);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NonFiniteSignal)
        throw Error(ErrorCode::NonFiniteSignal, e.message() + " (step " + std::to_string(k) + ")");
      throw;
    }
    std::vector<double> row;
    row.reserve(recorded.size());
    for (std::size_t idx : recorded)
      row.push_back(signals[model.outputs()[idx].port.block]);
    trace.times.push_back(t);
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

} // namespace cosim
