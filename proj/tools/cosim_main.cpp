// Command-line front end: run, cosim, compare, bench and testbed subcommands,
// plus the follower role entry (--role follower) spawned by `cosim cosim`.

#include "cosim/engine.hpp"
#include "cosim/error.hpp"
#include "cosim/model_json.hpp"
#include "cosim/orchestrate.hpp"
#include "cosim/split.hpp"
#include "cosim/testbed.hpp"
#include "cosim/trace.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

namespace {

using namespace cosim;

bool is_protocol_failure(ErrorCode code) {
  switch (code) {
  case ErrorCode::NameInUse:
  case ErrorCode::OsFailure:
  case ErrorCode::Timeout:
  case ErrorCode::VersionMismatch:
  case ErrorCode::BadMagic:
  case ErrorCode::ProtocolViolation:
  case ErrorCode::AbortReceived:
  case ErrorCode::SpawnFailure:
  case ErrorCode::CosimFailed:
    return true;
  default:
    return false;
  }
}

// Exit contract: 0 success, 1 usage/validation, 2 protocol/co-sim failure,
// 3 follower model error.
int master_exit_code(ErrorCode code) { return is_protocol_failure(code) ? 2 : 1; }
int follower_exit_code(ErrorCode code) { return is_protocol_failure(code) ? 2 : 3; }

double wall_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Model load_model_with_scenario(const std::filesystem::path& model_path,
                               const std::filesystem::path& scenario_path, double t_end) {
  Model model = load_model(model_path);
  if (scenario_path.empty()) return model;
  const Scenario scenario = load_scenario(scenario_path);
  const Testbed tb = locate_testbed(std::move(model));
  return apply_scenario(tb, scenario, t_end);
}

CutSet resolve_cut(const Model& model, const std::string& cut_arg) {
  if (std::filesystem::exists(cut_arg)) return load_cut(cut_arg);

  std::vector<NamedCut> cuts;
  try {
    cuts = standard_cuts(locate_testbed(model));
  } catch (const Error&) {
    throw Error(ErrorCode::InvalidArgument,
                "'" + cut_arg + "' is neither a cut file nor a named cut of a testbed model");
  }
  std::string names;
  for (const NamedCut& nc : cuts) {
    if (nc.name == cut_arg) return nc.cut;
    names += names.empty() ? nc.name : ", " + nc.name;
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown cut '" + cut_arg + "'; available cuts: " + names);
}

int cmd_run(const std::filesystem::path& model_path, const std::filesystem::path& scenario_path,
            double dt, double t_end, const std::filesystem::path& out) {
  const Model model = load_model_with_scenario(model_path, scenario_path, t_end);
  const SimConfig config{dt, t_end, {}};

  const auto t0 = std::chrono::steady_clock::now();
  const Trace trace = simulate(model, config);
  RunStats stats;
  stats.role = RunStats::Role::Mono;
  stats.steps = num_steps(config);
  stats.exchanges = 0;
  stats.wall_time_s = wall_seconds(t0);

  write_trace_csv(trace, out);
  std::cout << stats.to_string() << "\n";
  std::cout << "wrote " << trace.num_rows() << " rows x " << trace.num_columns() << " columns to "
            << out.string() << "\n";
  return 0;
}

int cmd_cosim(const std::filesystem::path& model_path, const std::string& cut_arg,
              const std::filesystem::path& scenario_path, double dt, double t_end,
              const std::filesystem::path& out, const std::string& channel_name, int timeout_ms) {
  const Model model = load_model_with_scenario(model_path, scenario_path, t_end);
  const CutSet cut = resolve_cut(model, cut_arg);

  CosimOptions options;
  options.channel_name = channel_name;
  if (timeout_ms > 0) options.channel.timeout = std::chrono::milliseconds(timeout_ms);

  auto [trace, stats] = run_cosim(model, cut, SimConfig{dt, t_end, {}}, options);
  write_trace_csv(trace, out);
  std::cout << stats.to_string() << "\n";
  std::cout << "wrote " << trace.num_rows() << " rows x " << trace.num_columns() << " columns to "
            << out.string() << "\n";
  return 0;
}

int cmd_compare(const std::filesystem::path& a_path, const std::filesystem::path& b_path,
                double tol) {
  const Trace a = read_trace_csv(a_path);
  const Trace b = read_trace_csv(b_path);
  const ComparisonReport report = compare_traces(a, b, tol);

  auto column_name = [&](std::size_t slot) { return slot == 0 ? std::string("t") : a.columns[slot - 1]; };
  for (std::size_t c = 0; c < report.max_abs_diff.size(); ++c) {
    std::printf("column %-16s max |diff| = %.3e\n", ("'" + column_name(c) + "'").c_str(),
                report.max_abs_diff[c]);
  }
  if (report.pass) {
    std::printf("PASS (tol %.3e)\n", tol);
    return 0;
  }
  std::printf("FAIL (tol %.3e): first divergence at row %zu, column '%s': %.17g vs %.17g\n", tol,
              report.first_row, column_name(report.first_column).c_str(), report.value_a,
              report.value_b);
  return 1;
}

int cmd_bench(const std::filesystem::path& model_path, const std::string& cut_arg,
              const std::filesystem::path& scenario_path, double dt, double t_end, int repeats) {
  const Model model = load_model_with_scenario(model_path, scenario_path, t_end);
  const CutSet cut = resolve_cut(model, cut_arg);
  const SimConfig config{dt, t_end, {}};

  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };

  std::vector<double> mono_times, cosim_times;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)simulate(model, config);
    mono_times.push_back(wall_seconds(t0));
  }
  for (int r = 0; r < repeats; ++r) {
    auto [trace, stats] = run_cosim(model, cut, config);
    (void)trace;
    cosim_times.push_back(stats.wall_time_s);
  }

  const double mono = median(mono_times);
  const double cosim = median(cosim_times);
  std::printf("%-18s %-18s %-18s %s\n", "simulation time", "without bridge", "with bridge", "ratio");
  std::printf("%-18s %-18.6f %-18.6f %.2f\n", "median wall (s)", mono, cosim,
              mono > 0 ? cosim / mono : 0.0);
  return 0;
}

int cmd_testbed(const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const Testbed tb = build_smib_model();

  save_model(tb.model, out_dir / "model.json");

  Scenario load_step;
  load_step.kind = Scenario::Kind::LoadStep;
  load_step.event_time_s = 0.2;
  load_step.magnitude_mw = 5.0;
  save_scenario(load_step, out_dir / "scenario_load_step.json");

  Scenario fault;
  fault.kind = Scenario::Kind::ThreePhaseFault;
  fault.event_time_s = 0.1;
  fault.clear_time_s = 0.2;
  save_scenario(fault, out_dir / "scenario_fault.json");

  for (const NamedCut& nc : standard_cuts(tb))
    save_cut(nc.cut, out_dir / ("cut_" + nc.name + ".json"));

  std::cout << "wrote model.json, scenario_load_step.json, scenario_fault.json, "
               "cut_avr.json, cut_governor.json, cut_both.json to "
            << out_dir.string() << "\n";
  return 0;
}

int run_follower_role(const std::string& channel, const std::filesystem::path& model_path,
                      double dt, double t_end, int timeout_ms) {
  FollowerSpec spec;
  spec.channel_name = channel;
  spec.model_path = model_path;
  spec.dt = dt;
  spec.t_end = t_end;
  if (timeout_ms > 0) spec.channel.timeout = std::chrono::milliseconds(timeout_ms);

  const RunStats stats = run_follower(spec);
  std::cout << stats.to_string() << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lockstep co-simulation toolkit: block-diagram engine coupled over named shared memory"};
  app.require_subcommand(0, 1);

  // Follower role contract:
  //   cosim --role follower --channel <name> --model <path> --dt <s> --t-end <s>
  std::string role;
  std::string role_channel;
  std::filesystem::path role_model;
  double role_dt = 1e-3, role_t_end = 0.0;
  int role_timeout_ms = 0;
  app.add_option("--role", role)->check(CLI::IsMember({"follower"}));
  app.add_option("--channel", role_channel);
  app.add_option("--model", role_model);
  app.add_option("--dt", role_dt);
  app.add_option("--t-end", role_t_end);
  app.add_option("--timeout-ms", role_timeout_ms);

  // run
  auto* run = app.add_subcommand("run", "Simulate a model in one process and write a CSV trace");
  std::filesystem::path run_model, run_scenario, run_out;
  double run_dt = 1e-3, run_t_end = 10.0;
  run->add_option("--model", run_model, "model JSON")->required();
  run->add_option("--scenario", run_scenario, "scenario JSON (testbed models)");
  run->add_option("--dt", run_dt, "step size, s")->required();
  run->add_option("--t-end", run_t_end, "horizon, s")->required();
  run->add_option("--out", run_out, "output trace CSV")->required();

  // cosim
  auto* cs = app.add_subcommand("cosim", "Split a model and co-simulate it across two processes");
  std::filesystem::path cs_model, cs_scenario, cs_out;
  std::string cs_cut, cs_channel;
  double cs_dt = 1e-3, cs_t_end = 10.0;
  int cs_timeout_ms = 0;
  cs->add_option("--model", cs_model, "model JSON")->required();
  cs->add_option("--cut", cs_cut, "cut file or named cut (avr, governor, both)")->required();
  cs->add_option("--scenario", cs_scenario, "scenario JSON (testbed models)");
  cs->add_option("--dt", cs_dt, "step size, s")->required();
  cs->add_option("--t-end", cs_t_end, "horizon, s")->required();
  cs->add_option("--out", cs_out, "output trace CSV")->required();
  cs->add_option("--channel", cs_channel, "shared-memory channel name");
  cs->add_option("--timeout-ms", cs_timeout_ms, "exchange timeout");

  // compare
  auto* cmp = app.add_subcommand("compare", "Compare two trace CSVs cell by cell");
  std::filesystem::path cmp_a, cmp_b;
  double cmp_tol = 0.0;
  cmp->add_option("a", cmp_a, "first trace")->required();
  cmp->add_option("b", cmp_b, "second trace")->required();
  cmp->add_option("--tol", cmp_tol, "tolerance on |diff|");

  // bench
  auto* bench = app.add_subcommand("bench", "Median wall time of monolithic vs co-simulated runs");
  std::filesystem::path bench_model, bench_scenario;
  std::string bench_cut;
  double bench_dt = 1e-3, bench_t_end = 10.0;
  int bench_repeats = 5;
  bench->add_option("--model", bench_model)->required();
  bench->add_option("--cut", bench_cut)->required();
  bench->add_option("--scenario", bench_scenario);
  bench->add_option("--dt", bench_dt)->required();
  bench->add_option("--t-end", bench_t_end)->required();
  bench->add_option("--repeats", bench_repeats, "must be at least 3");

  // testbed
  auto* tb = app.add_subcommand("testbed", "Emit the built-in single-machine model, scenarios and cuts");
  std::filesystem::path tb_dir;
  tb->add_option("--out-dir", tb_dir)->required();

  CLI11_PARSE(app, argc, argv);

  const bool follower_role = role == "follower";
  try {
    if (follower_role) {
      if (role_channel.empty() || role_model.empty()) {
        std::cerr << "error: --role follower requires --channel and --model\n";
        return 1;
      }
      return run_follower_role(role_channel, role_model, role_dt, role_t_end, role_timeout_ms);
    }
    if (run->parsed()) return cmd_run(run_model, run_scenario, run_dt, run_t_end, run_out);
    if (cs->parsed())
      return cmd_cosim(cs_model, cs_cut, cs_scenario, cs_dt, cs_t_end, cs_out, cs_channel,
                       cs_timeout_ms);
    if (cmp->parsed()) return cmd_compare(cmp_a, cmp_b, cmp_tol);
    if (bench->parsed()) {
      if (bench_repeats < 3) {
        std::cerr << "error: --repeats must be at least 3\n";
        return 1;
      }
      return cmd_bench(bench_model, bench_cut, bench_scenario, bench_dt, bench_t_end, bench_repeats);
    }
    if (tb->parsed()) return cmd_testbed(tb_dir);
    std::cerr << app.help();
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return follower_role ? follower_exit_code(e.code()) : master_exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return follower_role ? 3 : 1;
  }
}
