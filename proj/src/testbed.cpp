#include "cosim/testbed.hpp"

#include "cosim/builder.hpp"
#include "cosim/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>

namespace cosim {

namespace {

// Step sources parked beyond any realistic horizon are inert until a
// scenario retunes them; finite so models survive a JSON round trip.
constexpr double kDisabledTime = 1e300;

struct Equilibrium {
  double emf0;
  double delta0;
  double p_ref;
};

Equilibrium solve_equilibrium(const GeneratorParams& gen) {
  const double p0 = gen.gen_mw / gen.base_mva;
  const double q0 = gen.gen_mvar / gen.base_mva;
  const double xd = gen.xd_transient;

  // EMF behind the transient reactance for a 1 pu bus at angle zero.
  const double e_re = 1.0 + xd * q0;
  const double e_im = xd * p0;

  Equilibrium eq;
  eq.emf0 = std::hypot(e_re, e_im);
  eq.delta0 = std::atan2(e_im, e_re);
  // Mirror the block arithmetic exactly so the swing sum starts at 0.0.
  const double gate0 = 1.0;
  const double vbus0 = 1.0 * gate0;
  const double vsin0 = vbus0 * std::sin(eq.delta0);
  eq.p_ref = (1.0 / xd) * (eq.emf0 * vsin0);
  return eq;
}

} // namespace

Testbed build_smib_model(const TestbedParams& params) {
  const GeneratorParams& gen = params.gen;
  if (!(gen.inertia_h > 0.0))
    throw Error(ErrorCode::InvalidArgument, "inertia constant must be positive");
  if (!(gen.base_mva > 0.0))
    throw Error(ErrorCode::InvalidArgument, "base MVA must be positive");
  if (!(gen.xd_transient > 0.0))
    throw Error(ErrorCode::InvalidArgument, "transient reactance must be positive");
  if (!(params.droop_r > 0.0))
    throw Error(ErrorCode::InvalidArgument, "droop must be positive");

  const Equilibrium eq = solve_equilibrium(gen);
  const double omega_s = 2.0 * std::numbers::pi * params.f0_hz;

  Testbed tb;
  tb.params = params;
  tb.emf0 = eq.emf0;
  tb.delta0 = eq.delta0;
  tb.p_ref = eq.p_ref;

  ModelBuilder mb;

  // Bus voltage with the fault gate: vbus = vsrc * (1 - on + off).
  const BlockId one = mb.add(Constant{1.0});
  const BlockId fault_on = mb.add(Step{kDisabledTime, 0.0, 1.0});
  const BlockId fault_off = mb.add(Step{kDisabledTime, 0.0, 1.0});
  const BlockId gate = mb.add(Sum{{1, -1, 1}});
  const BlockId vsrc = mb.add(Constant{1.0});
  const BlockId vbus = mb.add(Product{});

  // Rotor angle and electrical power: pe = (1/xd') * emf * vbus * sin(delta).
  const BlockId delta = mb.add(Integrator{eq.delta0});
  const BlockId sind = mb.add(Sine{});
  const BlockId vsin = mb.add(Product{});
  const BlockId epse = mb.add(Product{});
  const BlockId pe = mb.add(Gain{1.0 / gen.xd_transient});

  // Swing pair: domega' = (pm - pe - D*domega - load)/(2H), delta' = ws*domega.
  const BlockId load = mb.add(Step{kDisabledTime, 0.0, 0.0});
  const BlockId dgain = mb.add(Gain{gen.damping});
  const BlockId swing = mb.add(Sum{{1, -1, -1, -1}});
  const BlockId accel = mb.add(Gain{1.0 / (2.0 * gen.inertia_h)});
  const BlockId domega = mb.add(Integrator{0.0});
  const BlockId ddelta = mb.add(Gain{omega_s});

  // AVR: first-order lag from voltage error, with an exciter ceiling.
  const BlockId vref = mb.add(Constant{1.0});
  const BlockId verr = mb.add(Sum{{1, -1}});
  const BlockId avr_k = mb.add(Gain{params.avr_enabled ? params.avr_gain : 0.0});
  const BlockId eref = mb.add(Constant{eq.emf0});
  const BlockId avr_in = mb.add(Sum{{1, 1}});
  const BlockId avr_lag = mb.add(FirstOrderLag{1.0, params.t_avr_s, eq.emf0});
  const BlockId exc_lim = mb.add(Limiter{0.0, params.exciter_ceiling * eq.emf0});

  // Governor/turbine: droop into a first-order lag.
  const BlockId pref = mb.add(Constant{eq.p_ref});
  const BlockId gov_k = mb.add(Gain{params.governor_enabled ? -1.0 / params.droop_r : 0.0});
  const BlockId gov_in = mb.add(Sum{{1, 1}});
  const BlockId gov_lag = mb.add(FirstOrderLag{1.0, params.t_gov_s, eq.p_ref});

  // Observables.
  const BlockId fgain = mb.add(Gain{params.f0_hz});
  const BlockId fbase = mb.add(Constant{params.f0_hz});
  const BlockId freq = mb.add(Sum{{1, 1}});
  const BlockId pmw = mb.add(Gain{gen.base_mva});

  mb.connect(one, gate, 0);
  mb.connect(fault_on, gate, 1);
  mb.connect(fault_off, gate, 2);
  mb.connect(vsrc, vbus, 0);
  mb.connect(gate, vbus, 1);
  mb.connect(delta, sind, 0);
  mb.connect(vbus, vsin, 0);
  mb.connect(sind, vsin, 1);
  tb.w_emf_to_pe = mb.connect(exc_lim, epse, 0);
  mb.connect(vsin, epse, 1);
  mb.connect(epse, pe, 0);
  tb.w_pm_to_swing = mb.connect(gov_lag, swing, 0);
  mb.connect(pe, swing, 1);
  mb.connect(dgain, swing, 2);
  mb.connect(load, swing, 3);
  mb.connect(domega, dgain, 0);
  mb.connect(swing, accel, 0);
  mb.connect(accel, domega, 0);
  mb.connect(domega, ddelta, 0);
  mb.connect(ddelta, delta, 0);
  mb.connect(vref, verr, 0);
  tb.w_vbus_to_avr = mb.connect(vbus, verr, 1);
  mb.connect(verr, avr_k, 0);
  mb.connect(eref, avr_in, 0);
  mb.connect(avr_k, avr_in, 1);
  mb.connect(avr_in, avr_lag, 0);
  mb.connect(avr_lag, exc_lim, 0);
  tb.w_speed_to_gov = mb.connect(domega, gov_k, 0);
  mb.connect(pref, gov_in, 0);
  mb.connect(gov_k, gov_in, 1);
  mb.connect(gov_in, gov_lag, 0);
  mb.connect(domega, fgain, 0);
  mb.connect(fbase, freq, 0);
  mb.connect(fgain, freq, 1);
  tb.w_pm_to_output = mb.connect(gov_lag, pmw, 0);

  mb.expose_output(freq, "frequency");
  mb.expose_output(vbus, "bus_voltage");
  mb.expose_output(pmw, "turbine_power");

  tb.fault_on = fault_on;
  tb.fault_off = fault_off;
  tb.load_step = load;
  tb.b_vbus = vbus;
  tb.b_delta = delta;
  tb.b_domega = domega;
  tb.b_avr_lag = avr_lag;
  tb.b_exc_lim = exc_lim;
  tb.b_gov_lag = gov_lag;
  tb.b_pmw = pmw;
  tb.b_fbase = fbase;
  tb.model = std::move(mb).build();
  return tb;
}

Testbed locate_testbed(Model model) {
  const Testbed canon = build_smib_model();
  const Model& ref = canon.model;

  auto mismatch = [](const std::string& what) {
    throw Error(ErrorCode::InvalidArgument, "model is not a testbed: " + what);
  };

  if (model.num_blocks() != ref.num_blocks()) mismatch("block count differs");
  for (std::size_t b = 0; b < ref.num_blocks(); ++b) {
    if (model.blocks()[b].kind.index() != ref.blocks()[b].kind.index())
      mismatch("block " + std::to_string(b) + " has kind " + kind_name(model.blocks()[b].kind) +
               ", expected " + kind_name(ref.blocks()[b].kind));
  }
  if (model.wires() != ref.wires()) mismatch("wiring differs");
  if (!model.inputs().empty()) mismatch("unexpected external inputs");
  if (model.outputs().size() != ref.outputs().size()) mismatch("output count differs");
  for (std::size_t i = 0; i < ref.outputs().size(); ++i)
    if (model.outputs()[i].port != ref.outputs()[i].port ||
        model.outputs()[i].name != ref.outputs()[i].name)
      mismatch("output " + std::to_string(i) + " differs");

  Testbed tb = canon;

  // Recover what the blocks themselves record; the rest keeps defaults.
  const auto& blocks = model.blocks();
  tb.params = TestbedParams{};
  tb.params.gen.base_mva = std::get<Gain>(blocks[canon.b_pmw].kind).k;
  tb.params.f0_hz = std::get<Constant>(blocks[canon.b_fbase].kind).value;
  tb.emf0 = std::get<FirstOrderLag>(blocks[canon.b_avr_lag].kind).initial;
  tb.delta0 = std::get<Integrator>(blocks[canon.b_delta].kind).initial;
  tb.p_ref = std::get<FirstOrderLag>(blocks[canon.b_gov_lag].kind).initial;

  tb.model = std::move(model);
  return tb;
}

Model apply_scenario(const Testbed& testbed, const Scenario& scenario, double t_end) {
  if (!(scenario.event_time_s > 0.0) || !(scenario.event_time_s < t_end))
    throw Error(ErrorCode::BadScenario, "event time " + std::to_string(scenario.event_time_s) +
                                            " outside (0, " + std::to_string(t_end) + ")");

  std::vector<Block> blocks = testbed.model.blocks();
  if (scenario.kind == Scenario::Kind::LoadStep) {
    blocks[testbed.load_step].kind =
        Step{scenario.event_time_s, 0.0, scenario.magnitude_mw / testbed.params.gen.base_mva};
  } else {
    if (!(scenario.clear_time_s > scenario.event_time_s) || !(scenario.clear_time_s <= t_end))
      throw Error(ErrorCode::BadScenario,
                  "clear time " + std::to_string(scenario.clear_time_s) + " must lie in (" +
                      std::to_string(scenario.event_time_s) + ", " + std::to_string(t_end) + "]");
    blocks[testbed.fault_on].kind = Step{scenario.event_time_s, 0.0, 1.0};
    blocks[testbed.fault_off].kind = Step{scenario.clear_time_s, 0.0, 1.0};
  }

  std::vector<OutputSpec> outputs(testbed.model.outputs().begin(), testbed.model.outputs().end());
  return validate_and_order(std::move(blocks), testbed.model.wires(), testbed.model.inputs(),
                            std::move(outputs));
}

std::vector<NamedCut> standard_cuts(const Testbed& tb) {
  const CutSet avr{{
      {tb.w_vbus_to_avr, CutDirection::MasterToFollower},
      {tb.w_emf_to_pe, CutDirection::FollowerToMaster},
  }};
  const CutSet governor{{
      {tb.w_speed_to_gov, CutDirection::MasterToFollower},
      {tb.w_pm_to_swing, CutDirection::FollowerToMaster},
      {tb.w_pm_to_output, CutDirection::FollowerToMaster},
  }};
  CutSet both = avr;
  both.wires.insert(both.wires.end(), governor.wires.begin(), governor.wires.end());
  return {{"avr", avr}, {"governor", governor}, {"both", both}};
}

std::string scenario_to_json(const Scenario& scenario) {
  nlohmann::json doc;
  doc["kind"] = scenario.kind == Scenario::Kind::LoadStep ? "load_step" : "fault";
  doc["event_time"] = scenario.event_time_s;
  if (scenario.kind == Scenario::Kind::ThreePhaseFault) doc["clear_time"] = scenario.clear_time_s;
  if (scenario.kind == Scenario::Kind::LoadStep) doc["magnitude_mw"] = scenario.magnitude_mw;
  return doc.dump(2);
}

Scenario scenario_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("scenario JSON parse error: ") + e.what());
  }
  try {
    Scenario s;
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "load_step")
      s.kind = Scenario::Kind::LoadStep;
    else if (kind == "fault")
      s.kind = Scenario::Kind::ThreePhaseFault;
    else
      throw Error(ErrorCode::BadScenario, "unknown scenario kind '" + kind + "'");
    s.event_time_s = doc.at("event_time").get<double>();
    s.clear_time_s = doc.value("clear_time", 0.0);
    s.magnitude_mw = doc.value("magnitude_mw", 0.0);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadScenario, std::string("malformed scenario: ") + e.what());
  }
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  f << scenario_to_json(scenario) << '\n';
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return scenario_from_json(text);
}

} // namespace cosim
