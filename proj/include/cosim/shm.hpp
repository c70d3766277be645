#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cosim {

/// Handshake state published through the segment header. Legal transitions:
/// IDLE -> INPUTS_READY (master), INPUTS_READY -> OUTPUTS_READY (follower),
/// OUTPUTS_READY -> INPUTS_READY (master), any -> SHUTDOWN (master),
/// any -> ABORT (either side).
enum class ExchangeFlag : std::uint32_t {
  Idle = 0,
  InputsReady = 1,
  OutputsReady = 2,
  Shutdown = 3,
  Abort = 4,
};

const char* flag_name(ExchangeFlag flag);

/// Frozen little-endian wire image of the segment:
///
///   offset  size  field
///        0     4  magic, ASCII "CSIM"
///        4     4  version (u32) = 1
///        8     4  flag (u32)
///       12     4  step counter (u32)
///       16     8  sim_time (f64, seconds)
///       24     4  n_inputs (u32)
///       28     4  n_outputs (u32)
///       32     -  inputs f64[n_inputs], then outputs f64[n_outputs]
namespace wire_layout {
inline constexpr std::uint32_t kMagic = 0x4D495343u; // "CSIM" read as little-endian u32
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kMagicOffset = 0;
inline constexpr std::size_t kVersionOffset = 4;
inline constexpr std::size_t kFlagOffset = 8;
inline constexpr std::size_t kStepOffset = 12;
inline constexpr std::size_t kSimTimeOffset = 16;
inline constexpr std::size_t kNInputsOffset = 24;
inline constexpr std::size_t kNOutputsOffset = 28;
inline constexpr std::size_t kHeaderSize = 32;
inline constexpr std::size_t kDataOffset = 32;
inline constexpr std::size_t kMaxInputs = 1800;
inline constexpr std::size_t kMaxOutputs = 600;

constexpr std::size_t segment_size(std::size_t n_inputs, std::size_t n_outputs) {
  return kHeaderSize + sizeof(double) * (n_inputs + n_outputs);
}
} // namespace wire_layout

struct ChannelConfig {
  std::chrono::milliseconds timeout{5000};
  std::chrono::microseconds poll_interval{50};
};

enum class Role { Master, Follower };

/// One served exchange as the follower sees it.
struct ExchangeRecord {
  std::uint32_t step = 0;
  double sim_time = 0.0;
  std::span<const double> inputs;
};

/// Duplex lockstep channel over one named shared-memory segment. The master
/// creates and owns the name; the follower attaches. Payload writes by one
/// side happen-before the other side's observation of the flag value that
/// publishes them. A Channel is confined to one thread at a time.
class Channel {
public:
  /// Handler invoked per exchange; must fill all of `outputs`.
  using Handler = std::function<void(const ExchangeRecord&, std::span<double> outputs)>;

  /// Creates the named segment, zeroes it and initializes the header.
  /// A leftover segment whose creator is no longer alive is reclaimed.
  /// Throws NameInUse, CapacityExceeded, OsFailure.
  static Channel create_master(const std::string& name, std::size_t n_inputs, std::size_t n_outputs,
                               const ChannelConfig& config = {});

  /// Attaches to a segment created by a master, retrying until the timeout.
  /// Throws Timeout, BadMagic, VersionMismatch, OsFailure.
  static Channel open_follower(const std::string& name, const ChannelConfig& config = {});

  Channel() = default;
  ~Channel();
  Channel(Channel&& other) noexcept;
  Channel& operator=(Channel&& other) noexcept;
  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;

  /// Master: publish inputs for `step` at `sim_time`, wait for the follower's
  /// reply and return the outputs. After the first exchange, `step` must be
  /// exactly the previous step + 1.
  /// Throws Timeout, ProtocolViolation, AbortReceived, ShapeMismatch.
  std::vector<double> exchange(std::uint32_t step, double sim_time, std::span<const double> inputs);

  /// Follower: serve exchanges until SHUTDOWN; returns the number served.
  /// A throwing handler publishes ABORT and surfaces as HandlerFailure.
  /// Throws Timeout, ProtocolViolation, AbortReceived, HandlerFailure.
  std::size_t serve(const Handler& handler);

  /// Publish ABORT (legal from any state, either side).
  void abort() noexcept;

  /// Master: publish SHUTDOWN (unless aborted), unmap and release the name.
  /// Follower: unmap and detach. Idempotent.
  void close() noexcept;

  bool is_open() const { return map_ != nullptr; }
  Role role() const { return role_; }
  const std::string& name() const { return name_; }
  std::size_t n_inputs() const { return n_inputs_; }
  std::size_t n_outputs() const { return n_outputs_; }
  const ChannelConfig& config() const { return config_; }

  // Header peeks (acquire loads), used by tests and diagnostics.
  ExchangeFlag flag() const;
  std::uint32_t step() const;
  double sim_time() const;

  /// Raw segment bytes (layout golden tests).
  std::span<const std::byte> raw() const;

private:
  Channel(std::string name, Role role) : name_(std::move(name)), role_(role) {}

  ExchangeFlag wait_while(std::initializer_list<ExchangeFlag> pending) const;
  std::uint32_t load_u32(std::size_t offset) const;
  void store_u32(std::size_t offset, std::uint32_t value) const;

  std::string name_;
  Role role_ = Role::Master;
  ChannelConfig config_;
  int fd_ = -1;
  std::byte* map_ = nullptr;
  std::size_t map_size_ = 0;
  std::size_t n_inputs_ = 0;
  std::size_t n_outputs_ = 0;
};

} // namespace cosim
