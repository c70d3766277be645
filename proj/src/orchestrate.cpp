#include "cosim/orchestrate.hpp"

#include "cosim/error.hpp"
#include "cosim/model_json.hpp"
#include "cosim/process.hpp"

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace cosim {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string format_double_arg(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string unique_tag() {
  static std::atomic<unsigned> seq{0};
  return std::to_string(::getpid()) + "." + std::to_string(seq.fetch_add(1));
}

std::string read_tail(const std::filesystem::path& path, std::size_t max_bytes = 2000) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return {};
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r'))
    text.pop_back();
  if (text.size() > max_bytes) text = "..." + text.substr(text.size() - max_bytes);
  return text;
}

struct ScratchFiles {
  std::filesystem::path payload;
  std::filesystem::path stderr_file;

  ~ScratchFiles() {
    std::error_code ec;
    if (!payload.empty()) std::filesystem::remove(payload, ec);
    if (!stderr_file.empty()) std::filesystem::remove(stderr_file, ec);
  }
};

} // namespace

std::string RunStats::to_string() const {
  const char* r = role == Role::Mono ? "mono" : (role == Role::Master ? "master" : "follower");
  std::ostringstream os;
  os << "[" << r << "] steps=" << steps << " exchanges=" << exchanges << " wall=" << wall_time_s
     << "s";
  return os.str();
}

Trace run_master(const SplitPlan& plan, const SimConfig& config, const ChannelConfig& channel,
                 RunStats* stats) {
  if (plan.channel_name.empty())
    throw Error(ErrorCode::InvalidArgument, "split plan carries no channel name");
  if (plan.master_model.inputs().size() != plan.n_f2m_cut ||
      plan.m2f_sources.size() != plan.n_m2f ||
      plan.output_sources.size() != plan.column_names.size() || plan.n_f2m < plan.n_f2m_cut)
    throw Error(ErrorCode::BoundaryShapeMismatch, "split plan is internally inconsistent");

  const std::size_t steps = num_steps(config);
  const auto t0 = Clock::now();

  Channel ch = Channel::create_master(plan.channel_name, plan.n_m2f, plan.n_f2m, channel);

  const Model& model = plan.master_model;
  std::vector<double> state = model.initial_state();
  std::vector<double> signals(model.num_blocks());
  std::vector<double> payload(plan.n_m2f);
  // Step-0 boundary values are zero, matching the zero-initialized segment.
  std::vector<double> boundary(plan.n_f2m_cut, 0.0);

  Trace trace;
  trace.dt = config.dt;
  trace.columns = plan.column_names;
  trace.times.reserve(steps + 1);
  trace.rows.reserve(steps + 1);

  std::size_t k = 0;
  try {
    for (; k <= steps; ++k) {
      const double t = static_cast<double>(k) * config.dt;
      eval_step(model, state, boundary, t, config.dt, signals);
      for (std::size_t j = 0; j < plan.n_m2f; ++j)
        payload[j] = signals[plan.m2f_sources[j]];

      const std::vector<double> reply =
          ch.exchange(static_cast<std::uint32_t>(k + 1), t, payload);

      std::vector<double> row;
      row.reserve(plan.output_sources.size());
      for (const OutputSource& src : plan.output_sources)
        row.push_back(src.from_master ? signals[src.index] : reply[src.index]);
      trace.times.push_back(t);
      trace.rows.push_back(std::move(row));

      boundary.assign(reply.begin(), reply.begin() + static_cast<long>(plan.n_f2m_cut));
    }
  } catch (const Error& e) {
    ch.abort();
    throw Error(e.code(), e.message() + " (co-sim step " + std::to_string(k) + ")");
  }

  ch.close(); // publishes SHUTDOWN, releases the name

  if (stats) {
    stats->role = RunStats::Role::Master;
    stats->steps = steps;
    stats->exchanges = steps + 1;
    stats->wall_time_s = seconds_since(t0);
  }
  return trace;
}

RunStats run_follower(const FollowerSpec& spec) {
  const auto t0 = Clock::now();
  const Model model = load_model(spec.model_path);
  num_steps(SimConfig{spec.dt, spec.t_end, {}}); // validates dt/t_end

  Channel ch = Channel::open_follower(spec.channel_name, spec.channel);
  if (ch.n_inputs() != model.inputs().size() || ch.n_outputs() != model.outputs().size())
    throw Error(ErrorCode::BoundaryShapeMismatch,
                "follower model wants " + std::to_string(model.inputs().size()) + "/" +
                    std::to_string(model.outputs().size()) + " boundary signals, channel carries " +
                    std::to_string(ch.n_inputs()) + "/" + std::to_string(ch.n_outputs()));

  std::vector<double> state = model.initial_state();
  std::vector<double> signals(model.num_blocks());
  // Exchange k is evaluated with the previous exchange's payload; the first
  // evaluation sees zeros, matching the unit-delay oracle's initial output.
  std::vector<double> pending(model.inputs().size(), 0.0);
  std::size_t k = 0;

  const std::size_t served = ch.serve([&](const ExchangeRecord& rec, std::span<double> out) {
    const double t = static_cast<double>(k) * spec.dt;
    eval_step(model, state, pending, t, spec.dt, signals);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = signals[model.outputs()[i].port.block];
    pending.assign(rec.inputs.begin(), rec.inputs.end());
    ++k;
  });
  ch.close();

  RunStats stats;
  stats.role = RunStats::Role::Follower;
  stats.exchanges = served;
  stats.steps = served > 0 ? served - 1 : 0;
  stats.wall_time_s = seconds_since(t0);
  return stats;
}

std::filesystem::path own_executable_path() {
  std::error_code ec;
  auto p = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (ec) throw Error(ErrorCode::OsFailure, "cannot resolve own executable: " + ec.message());
  return p;
}

std::pair<Trace, RunStats> run_cosim(const Model& model, const CutSet& cut, const SimConfig& config,
                                     const CosimOptions& options) {
  const auto t0 = Clock::now();
  const std::string tag = unique_tag();

  SplitPlan plan = split(model, cut,
                         options.channel_name.empty() ? "cosim." + tag : options.channel_name);

  const std::filesystem::path scratch =
      options.scratch_dir.empty() ? std::filesystem::temp_directory_path() : options.scratch_dir;
  ScratchFiles files;
  files.payload = scratch / ("cosim_follower_" + tag + ".json");
  files.stderr_file = scratch / ("cosim_follower_" + tag + ".stderr");
  save_model(plan.follower_model, files.payload);

  std::filesystem::path binary;
  if (const char* env = std::getenv("COSIM_FOLLOWER_BIN"); env && *env)
    binary = env;
  else if (!options.follower_binary.empty())
    binary = options.follower_binary;
  else
    binary = own_executable_path();

  ChildProcess child = ChildProcess::spawn(
      {binary.string(), "--role", "follower", "--channel", plan.channel_name, "--model",
       files.payload.string(), "--dt", format_double_arg(config.dt), "--t-end",
       format_double_arg(config.t_end)},
      {.stdout_to = options.follower_stdout_to, .stderr_to = files.stderr_file});

  Trace trace;
  RunStats stats;
  try {
    trace = run_master(plan, config, options.channel, &stats);
  } catch (const Error& e) {
    child.wait_for(std::chrono::milliseconds(500));
    child.terminate();
    const std::string diag = read_tail(files.stderr_file);
    throw Error(e.code(), diag.empty() ? e.message() : e.message() + "; follower said: " + diag);
  }

  const auto grace = options.channel.timeout + std::chrono::milliseconds(2000);
  const std::optional<int> code = child.wait_for(grace);
  if (!code) {
    child.terminate();
    throw Error(ErrorCode::CosimFailed, "follower did not exit after SHUTDOWN");
  }
  if (*code != 0) {
    const std::string diag = read_tail(files.stderr_file);
    throw Error(ErrorCode::CosimFailed, "follower exited with code " + std::to_string(*code) +
                                            (diag.empty() ? "" : ": " + diag));
  }

  stats.wall_time_s = seconds_since(t0); // spawn + run + join
  return {std::move(trace), stats};
}

} // namespace cosim
