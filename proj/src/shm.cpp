#include "cosim/shm.hpp"

#include "cosim/error.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <bit>
#include <cerrno>
#include <cstring>
#include <thread>

namespace cosim {

// The frozen wire layout is little-endian; plain integer/double stores below
// rely on the host matching it.
static_assert(std::endian::native == std::endian::little, "wire layout requires a little-endian host");
static_assert(std::atomic_ref<std::uint32_t>::is_always_lock_free,
              "cross-process flag handshake requires lock-free 32-bit atomics");

namespace {

using namespace wire_layout;

std::string shm_path(const std::string& name) { return "/" + name; }

void validate_name(const std::string& name) {
  if (name.empty() || name.size() > 128)
    throw Error(ErrorCode::InvalidArgument, "channel name must be 1..128 bytes");
  for (char c : name) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '_' || c == '-';
    if (!ok)
      throw Error(ErrorCode::InvalidArgument,
                  "channel name '" + name + "' contains characters outside [A-Za-z0-9._-]");
  }
}

void validate_config(const ChannelConfig& config) {
  if (config.timeout.count() <= 0)
    throw Error(ErrorCode::InvalidArgument, "channel timeout must be positive");
  if (config.poll_interval.count() <= 0)
    throw Error(ErrorCode::InvalidArgument, "poll interval must be positive");
}

[[noreturn]] void throw_errno(const std::string& what) {
  throw Error(ErrorCode::OsFailure, what + ": " + std::strerror(errno));
}

} // namespace

const char* flag_name(ExchangeFlag flag) {
  switch (flag) {
  case ExchangeFlag::Idle: return "IDLE";
  case ExchangeFlag::InputsReady: return "INPUTS_READY";
  case ExchangeFlag::OutputsReady: return "OUTPUTS_READY";
  case ExchangeFlag::Shutdown: return "SHUTDOWN";
  case ExchangeFlag::Abort: return "ABORT";
  }
  return "INVALID";
}

std::uint32_t Channel::load_u32(std::size_t offset) const {
  return std::atomic_ref<std::uint32_t>(*reinterpret_cast<std::uint32_t*>(map_ + offset))
      .load(std::memory_order_acquire);
}

void Channel::store_u32(std::size_t offset, std::uint32_t value) const {
  std::atomic_ref<std::uint32_t>(*reinterpret_cast<std::uint32_t*>(map_ + offset))
      .store(value, std::memory_order_release);
}

Channel Channel::create_master(const std::string& name, std::size_t n_inputs, std::size_t n_outputs,
                               const ChannelConfig& config) {
  validate_name(name);
  validate_config(config);
  if (n_inputs > kMaxInputs)
    throw Error(ErrorCode::CapacityExceeded, "n_inputs " + std::to_string(n_inputs) + " exceeds " +
                                                 std::to_string(kMaxInputs));
  if (n_outputs > kMaxOutputs)
    throw Error(ErrorCode::CapacityExceeded, "n_outputs " + std::to_string(n_outputs) + " exceeds " +
                                                 std::to_string(kMaxOutputs));

  Channel ch(name, Role::Master);
  ch.config_ = config;
  ch.n_inputs_ = n_inputs;
  ch.n_outputs_ = n_outputs;

  const std::string path = shm_path(name);
  ch.fd_ = ::shm_open(path.c_str(), O_RDWR | O_CREAT, 0600);
  if (ch.fd_ < 0) throw_errno("shm_open('" + name + "')");

  // The creator keeps an exclusive flock for its lifetime; the kernel drops
  // it when the owner dies, which is how a stale segment is recognized and
  // reclaimed without owner metadata in the frozen header.
  if (::flock(ch.fd_, LOCK_EX | LOCK_NB) != 0) {
    const int err = errno;
    ::close(ch.fd_);
    ch.fd_ = -1;
    if (err == EWOULDBLOCK)
      throw Error(ErrorCode::NameInUse, "segment '" + name + "' already has a live owner");
    errno = err;
    throw_errno("flock('" + name + "')");
  }

  const std::size_t size = segment_size(n_inputs, n_outputs);
  if (::ftruncate(ch.fd_, static_cast<off_t>(size)) != 0) throw_errno("ftruncate('" + name + "')");

  void* map = ::mmap(nullptr, size, PROT_READ | PROT_WRITE, MAP_SHARED, ch.fd_, 0);
  if (map == MAP_FAILED) throw_errno("mmap('" + name + "')");
  ch.map_ = static_cast<std::byte*>(map);
  ch.map_size_ = size;

  std::memset(ch.map_, 0, size); // flag IDLE, step 0, sim_time 0, data zeroed
  std::uint32_t u32 = kVersion;
  std::memcpy(ch.map_ + kVersionOffset, &u32, 4);
  u32 = static_cast<std::uint32_t>(n_inputs);
  std::memcpy(ch.map_ + kNInputsOffset, &u32, 4);
  u32 = static_cast<std::uint32_t>(n_outputs);
  std::memcpy(ch.map_ + kNOutputsOffset, &u32, 4);
  ch.store_u32(kMagicOffset, kMagic); // publish: followers trust nothing before the magic
  return ch;
}

Channel Channel::open_follower(const std::string& name, const ChannelConfig& config) {
  validate_name(name);
  validate_config(config);

  const std::string path = shm_path(name);
  const auto deadline = std::chrono::steady_clock::now() + config.timeout;

  for (;;) {
    bool retry = false;
    int fd = ::shm_open(path.c_str(), O_RDWR, 0);
    if (fd < 0) {
      if (errno != ENOENT && errno != EACCES) throw_errno("shm_open('" + name + "')");
      retry = true;
    }

    std::byte* map = nullptr;
    std::size_t map_size = 0;
    if (!retry) {
      struct stat st{};
      if (::fstat(fd, &st) != 0) {
        ::close(fd);
        throw_errno("fstat('" + name + "')");
      }
      if (st.st_size < static_cast<off_t>(kHeaderSize)) {
        ::close(fd); // creator has not sized it yet
        retry = true;
      } else {
        map_size = static_cast<std::size_t>(st.st_size);
        void* m = ::mmap(nullptr, map_size, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
        if (m == MAP_FAILED) {
          ::close(fd);
          throw_errno("mmap('" + name + "')");
        }
        map = static_cast<std::byte*>(m);
      }
    }

    if (!retry) {
      Channel ch(name, Role::Follower);
      ch.config_ = config;
      ch.fd_ = fd;
      ch.map_ = map;
      ch.map_size_ = map_size;

      const std::uint32_t magic = ch.load_u32(kMagicOffset);
      if (magic == kMagic) {
        const std::uint32_t version = ch.load_u32(kVersionOffset);
        if (version != kVersion)
          throw Error(ErrorCode::VersionMismatch, "segment '" + name + "' has version " +
                                                      std::to_string(version) + ", expected " +
                                                      std::to_string(kVersion));
        ch.n_inputs_ = ch.load_u32(kNInputsOffset);
        ch.n_outputs_ = ch.load_u32(kNOutputsOffset);
        if (ch.n_inputs_ > kMaxInputs || ch.n_outputs_ > kMaxOutputs)
          throw Error(ErrorCode::BadMagic, "segment '" + name + "' header claims impossible counts");
        if (map_size < segment_size(ch.n_inputs_, ch.n_outputs_))
          throw Error(ErrorCode::BadMagic, "segment '" + name + "' is smaller than its header claims");
        return ch;
      }
      if (magic != 0)
        throw Error(ErrorCode::BadMagic, "segment '" + name + "' carries foreign magic");
      // zero magic: creator mid-initialization; detach and retry
      retry = true;
    }

    if (std::chrono::steady_clock::now() >= deadline)
      throw Error(ErrorCode::Timeout, "no initialized segment named '" + name + "' within " +
                                          std::to_string(config.timeout.count()) + " ms");
    std::this_thread::sleep_for(config.poll_interval);
  }
}

Channel::~Channel() { close(); }

Channel::Channel(Channel&& other) noexcept { *this = std::move(other); }

Channel& Channel::operator=(Channel&& other) noexcept {
  if (this != &other) {
    close();
    name_ = std::move(other.name_);
    role_ = other.role_;
    config_ = other.config_;
    fd_ = other.fd_;
    map_ = other.map_;
    map_size_ = other.map_size_;
    n_inputs_ = other.n_inputs_;
    n_outputs_ = other.n_outputs_;
    other.fd_ = -1;
    other.map_ = nullptr;
    other.map_size_ = 0;
  }
  return *this;
}

ExchangeFlag Channel::flag() const { return static_cast<ExchangeFlag>(load_u32(kFlagOffset)); }
std::uint32_t Channel::step() const { return load_u32(kStepOffset); }

double Channel::sim_time() const {
  double t;
  std::memcpy(&t, map_ + kSimTimeOffset, sizeof t);
  return t;
}

std::span<const std::byte> Channel::raw() const { return {map_, map_size_}; }

ExchangeFlag Channel::wait_while(std::initializer_list<ExchangeFlag> pending) const {
  const auto deadline = std::chrono::steady_clock::now() + config_.timeout;
  unsigned spins = 0;
  for (;;) {
    const std::uint32_t v = load_u32(kFlagOffset);
    if (v > static_cast<std::uint32_t>(ExchangeFlag::Abort))
      throw Error(ErrorCode::ProtocolViolation, "corrupt flag value " + std::to_string(v));
    const ExchangeFlag f{v};
    bool waiting = false;
    for (ExchangeFlag p : pending)
      if (f == p) { waiting = true; break; }
    if (!waiting) return f;

    // Hot ping-pong resolves within the spin budget; fall back to sleeping
    // polls against the deadline once it is spent.
    if (spins < 8192) {
      if ((++spins & 63u) == 0) std::this_thread::yield();
      continue;
    }
    if (std::chrono::steady_clock::now() >= deadline)
      throw Error(ErrorCode::Timeout, std::string("peer silent for over ") +
                                          std::to_string(config_.timeout.count()) +
                                          " ms (flag stuck at " + flag_name(f) + ")");
    std::this_thread::sleep_for(config_.poll_interval);
  }
}

std::vector<double> Channel::exchange(std::uint32_t step, double sim_time,
                                      std::span<const double> inputs) {
  if (!is_open() || role_ != Role::Master)
    throw Error(ErrorCode::InvalidArgument, "exchange requires an open master channel");
  if (inputs.size() != n_inputs_)
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(n_inputs_) + " inputs, got " +
                                              std::to_string(inputs.size()));

  const ExchangeFlag f = flag();
  if (f == ExchangeFlag::Abort) throw Error(ErrorCode::AbortReceived, "follower aborted");
  if (f == ExchangeFlag::OutputsReady) {
    const std::uint32_t prev = load_u32(kStepOffset);
    if (step != prev + 1)
      throw Error(ErrorCode::ProtocolViolation, "step " + std::to_string(step) +
                                                    " does not follow header step " +
                                                    std::to_string(prev));
  } else if (f != ExchangeFlag::Idle) {
    throw Error(ErrorCode::ProtocolViolation,
                std::string("cannot publish inputs while flag is ") + flag_name(f));
  }

  if (!inputs.empty()) std::memcpy(map_ + kDataOffset, inputs.data(), inputs.size_bytes());
  std::memcpy(map_ + kSimTimeOffset, &sim_time, sizeof sim_time);
  std::uint32_t u32 = step;
  std::memcpy(map_ + kStepOffset, &u32, 4);
  store_u32(kFlagOffset, static_cast<std::uint32_t>(ExchangeFlag::InputsReady));

  const ExchangeFlag reply = wait_while({ExchangeFlag::InputsReady});
  if (reply == ExchangeFlag::Abort) throw Error(ErrorCode::AbortReceived, "follower aborted");
  if (reply != ExchangeFlag::OutputsReady)
    throw Error(ErrorCode::ProtocolViolation,
                std::string("unexpected flag ") + flag_name(reply) + " while awaiting outputs");

  std::vector<double> outputs(n_outputs_);
  if (n_outputs_ > 0)
    std::memcpy(outputs.data(), map_ + kDataOffset + sizeof(double) * n_inputs_,
                sizeof(double) * n_outputs_);
  return outputs;
}

std::size_t Channel::serve(const Handler& handler) {
  if (!is_open() || role_ != Role::Follower)
    throw Error(ErrorCode::InvalidArgument, "serve requires an open follower channel");

  std::vector<double> inbuf(n_inputs_);
  std::vector<double> outbuf(n_outputs_);
  std::size_t served = 0;

  for (;;) {
    const ExchangeFlag f = wait_while({ExchangeFlag::Idle, ExchangeFlag::OutputsReady});
    if (f == ExchangeFlag::Shutdown) return served;
    if (f == ExchangeFlag::Abort) throw Error(ErrorCode::AbortReceived, "master aborted");
    if (f != ExchangeFlag::InputsReady)
      throw Error(ErrorCode::ProtocolViolation,
                  std::string("unexpected flag ") + flag_name(f) + " while awaiting inputs");

    ExchangeRecord rec;
    rec.step = load_u32(kStepOffset);
    std::memcpy(&rec.sim_time, map_ + kSimTimeOffset, sizeof rec.sim_time);
    if (n_inputs_ > 0) std::memcpy(inbuf.data(), map_ + kDataOffset, sizeof(double) * n_inputs_);
    rec.inputs = inbuf;

    try {
      handler(rec, outbuf);
    } catch (const std::exception& e) {
      abort();
      throw Error(ErrorCode::HandlerFailure,
                  "handler failed at step " + std::to_string(rec.step) + ": " + e.what());
    }

    if (n_outputs_ > 0)
      std::memcpy(map_ + kDataOffset + sizeof(double) * n_inputs_, outbuf.data(),
                  sizeof(double) * n_outputs_);
    store_u32(kFlagOffset, static_cast<std::uint32_t>(ExchangeFlag::OutputsReady));
    ++served;
  }
}

void Channel::abort() noexcept {
  if (map_) store_u32(kFlagOffset, static_cast<std::uint32_t>(ExchangeFlag::Abort));
}

void Channel::close() noexcept {
  if (map_) {
    if (role_ == Role::Master && flag() != ExchangeFlag::Abort)
      store_u32(kFlagOffset, static_cast<std::uint32_t>(ExchangeFlag::Shutdown));
    ::munmap(map_, map_size_);
    map_ = nullptr;
    map_size_ = 0;
    if (role_ == Role::Master) ::shm_unlink(shm_path(name_).c_str());
  }
  if (fd_ >= 0) {
    ::close(fd_); // master: releases the ownership flock
    fd_ = -1;
  }
}

} // namespace cosim
