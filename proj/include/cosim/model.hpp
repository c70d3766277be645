#pragma once

#include "cosim/block.hpp"

#include <cstddef>
#include <limits>
#include <vector>

namespace cosim {

/// Identifies what drives one input port of one block.
struct PortDriver {
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  std::uint32_t wire = kNone;     // index into wires, or kNone
  std::uint32_t external = kNone; // index into inputs, or kNone

  bool is_wire() const { return wire != kNone; }
  bool is_external() const { return external != kNone; }
};

/// A validated block-diagram model. Construct through validate_and_order();
/// immutable afterwards and safe to share read-only across threads.
class Model {
public:
  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<Wire>& wires() const { return wires_; }
  const std::vector<PortRef>& inputs() const { return inputs_; }
  const std::vector<OutputSpec>& outputs() const { return outputs_; }
  const std::vector<BlockId>& eval_order() const { return eval_order_; }

  std::size_t num_blocks() const { return blocks_.size(); }

  /// Driver of block b's input port p.
  const PortDriver& driver(BlockId b, std::uint32_t p) const;

  /// Index into the state vector for memory block b; kNoState otherwise.
  static constexpr std::uint32_t kNoState = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t state_slot(BlockId b) const { return state_slot_[b]; }
  std::size_t num_states() const { return num_states_; }

  /// Initial state vector taken from the memory blocks' parameters.
  std::vector<double> initial_state() const;

  friend Model validate_and_order(std::vector<Block> blocks, std::vector<Wire> wires,
                                  std::vector<PortRef> inputs, std::vector<OutputSpec> outputs);

private:
  std::vector<Block> blocks_;
  std::vector<Wire> wires_;
  std::vector<PortRef> inputs_;
  std::vector<OutputSpec> outputs_;
  std::vector<BlockId> eval_order_;

  std::vector<std::vector<PortDriver>> drivers_; // [block][port]
  std::vector<std::uint32_t> state_slot_;        // [block]
  std::size_t num_states_ = 0;
};

/// Checks structural invariants (dense ids, ports in range, kind parameter
/// constraints, every input port driven exactly once) and computes a
/// deterministic evaluation order: topological sort of the dependency graph
/// in which memory-block outputs carry no edge, lowest ready id first.
///
/// Throws Error with code DanglingPort, DuplicateDrive, AlgebraicLoop (the
/// message names the cycle's block ids) or InvalidModel.
Model validate_and_order(std::vector<Block> blocks, std::vector<Wire> wires,
                         std::vector<PortRef> inputs, std::vector<OutputSpec> outputs = {});

} // namespace cosim
