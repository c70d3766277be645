#pragma once

#include "cosim/model.hpp"
#include "cosim/split.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cosim {

struct GeneratorParams {
  double v_nom_kv = 13.8;
  double inertia_h = 2.4922; // seconds
  double gen_mw = 20.0;
  double gen_mvar = 20.82;
  double xd_transient = 0.5897; // pu
  double damping = 1.0;         // pu torque per pu speed deviation
  double base_mva = 25.0;
};

struct TestbedParams {
  GeneratorParams gen;
  double droop_r = 0.05;
  double t_gov_s = 2.0;
  double t_avr_s = 0.5;
  double avr_gain = 5.0;
  double f0_hz = 60.0;
  double exciter_ceiling = 2.0; // multiple of the equilibrium EMF
  bool governor_enabled = true;
  bool avr_enabled = true;
};

struct Scenario {
  enum class Kind { LoadStep, ThreePhaseFault };

  Kind kind = Kind::LoadStep;
  double event_time_s = 0.2;
  double clear_time_s = 0.0; // faults only
  double magnitude_mw = 5.0; // load steps only
};

std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const std::string& text);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);

/// Single-machine testbed: generator swing pair, electrical power through a
/// sine nonlinearity, first-order AVR and droop governor, plus inert
/// disturbance hooks retuned by apply_scenario. Outputs: "frequency" (Hz),
/// "bus_voltage" (pu), "turbine_power" (MW).
struct Testbed {
  Model model;
  TestbedParams params;

  // Equilibrium the model is initialized at.
  double emf0 = 0.0;   // internal EMF magnitude, pu
  double delta0 = 0.0; // rotor angle, rad
  double p_ref = 0.0;  // mechanical power setpoint, pu

  // Scenario knobs.
  BlockId fault_on = 0;
  BlockId fault_off = 0;
  BlockId load_step = 0;

  // Blocks of interest for tests and parameter recovery.
  BlockId b_vbus = 0;
  BlockId b_delta = 0;
  BlockId b_domega = 0;
  BlockId b_avr_lag = 0;
  BlockId b_exc_lim = 0;
  BlockId b_gov_lag = 0;
  BlockId b_pmw = 0;
  BlockId b_fbase = 0;

  // Cut anchors.
  std::uint32_t w_vbus_to_avr = 0;  // bus voltage into the AVR error sum
  std::uint32_t w_emf_to_pe = 0;    // limited EMF into the power product
  std::uint32_t w_speed_to_gov = 0; // speed deviation into the droop gain
  std::uint32_t w_pm_to_swing = 0;  // turbine power into the swing sum
  std::uint32_t w_pm_to_output = 0; // turbine power into the MW scaler
};

Testbed build_smib_model(const TestbedParams& params = {});

/// Accepts any model whose structure matches the canonical builder (block
/// kinds, wires, outputs) and recovers the Testbed handle for it, reading
/// recoverable parameters back from the blocks. Throws InvalidArgument.
Testbed locate_testbed(Model model);

/// New model with the disturbance programmed in: a load step adds a Step term
/// to the swing summation; a fault drives the gated bus voltage to zero on
/// [event, clear). Throws BadScenario when times fall outside (0, t_end].
Model apply_scenario(const Testbed& testbed, const Scenario& scenario, double t_end);

struct NamedCut {
  std::string name;
  CutSet cut;
};

/// The named boundary choices: "avr", "governor" and "both".
std::vector<NamedCut> standard_cuts(const Testbed& testbed);

} // namespace cosim
