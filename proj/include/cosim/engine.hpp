#pragma once

#include "cosim/model.hpp"
#include "cosim/trace.hpp"

#include <functional>
#include <span>
#include <vector>

namespace cosim {

struct SimConfig {
  double dt = 1e-3;
  double t_end = 0.0;
  /// Indices into model.outputs() to record; empty = all.
  std::vector<std::size_t> recorded;
};

/// round(t_end/dt); the trace then has steps+1 rows (k = 0..steps).
std::size_t num_steps(const SimConfig& config);

/// Maps t to the external input vector (one value per model input).
using InputFn = std::function<std::vector<double>(double t)>;

/// Advances the model by one step at time t. `state` holds one value per
/// memory block (see Model::initial_state) and is updated in place to the
/// post-step state. `signals` receives every block's output at t; pass a
/// buffer of num_blocks() doubles.
///
/// Memory blocks emit their pre-update state, so their output never depends
/// on the current input. Throws NonFiniteSignal naming the block and t when
/// a NaN or infinity is produced.
void eval_step(const Model& model, std::vector<double>& state, std::span<const double> external_inputs,
               double t, double dt, std::span<double> signals);

/// Convenience wrapper returning the model outputs at t.
std::vector<double> eval_outputs(const Model& model, std::vector<double>& state,
                                 std::span<const double> external_inputs, double t, double dt);

/// Fixed-step run over k = 0..steps. Deterministic: identical inputs produce
/// a bit-identical trace. input_fn may be null for models without inputs.
Trace simulate(const Model& model, const SimConfig& config, const InputFn& input_fn = nullptr);

} // namespace cosim
