#pragma once

#include "cosim/engine.hpp"
#include "cosim/shm.hpp"
#include "cosim/split.hpp"
#include "cosim/trace.hpp"

#include <filesystem>
#include <string>
#include <utility>

namespace cosim {

struct RunStats {
  enum class Role { Mono, Master, Follower };

  Role role = Role::Mono;
  double wall_time_s = 0.0;
  std::size_t steps = 0;     // round(t_end/dt) intervals
  std::size_t exchanges = 0; // steps+1 for a completed co-sim, 0 for mono

  std::string to_string() const;
};

/// Invocation contract for the follower role:
///   <binary> --role follower --channel <name> --model <path> --dt <s> --t-end <s>
struct FollowerSpec {
  std::string channel_name;
  std::filesystem::path model_path;
  double dt = 1e-3;
  double t_end = 0.0;
  ChannelConfig channel;
};

struct CosimOptions {
  std::string channel_name;              // empty: generated unique name
  std::filesystem::path follower_binary; // empty: $COSIM_FOLLOWER_BIN, else this executable
  ChannelConfig channel;
  std::filesystem::path scratch_dir;        // empty: system temp dir
  std::filesystem::path follower_stdout_to; // empty: inherit (follower prints its stats)
};

/// Drives the master half over the split plan's channel: per step k the
/// master half is evaluated with the follower outputs received at step k-1
/// (zeros at k=0), then the step-k boundary signals are exchanged. Creates
/// the channel; a follower must attach within its own timeout. Sends
/// SHUTDOWN on completion.
Trace run_master(const SplitPlan& plan, const SimConfig& config, const ChannelConfig& channel = {},
                 RunStats* stats = nullptr);

/// Serves a follower model over the named channel until SHUTDOWN. Exchange k
/// is evaluated with the payload of exchange k-1 (zeros first), mirroring the
/// one-step-deferred consumption on the master side.
RunStats run_follower(const FollowerSpec& spec);

/// split + spawn follower process + run_master + join, with follower stderr
/// captured into any raised error. Throws SpawnFailure, CosimFailed, and
/// whatever run_master raises.
std::pair<Trace, RunStats> run_cosim(const Model& model, const CutSet& cut, const SimConfig& config,
                                     const CosimOptions& options = {});

/// Path of the running executable (/proc/self/exe).
std::filesystem::path own_executable_path();

} // namespace cosim
