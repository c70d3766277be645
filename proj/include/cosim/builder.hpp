#pragma once

#include "cosim/model.hpp"

#include <utility>

namespace cosim {

/// Incremental model assembly; ids are assigned densely in add() order.
class ModelBuilder {
public:
  BlockId add(BlockKind kind) {
    const BlockId id = static_cast<BlockId>(blocks_.size());
    blocks_.push_back(Block{id, std::move(kind)});
    return id;
  }

  /// Connects src's output to dst's input port; returns the wire index.
  std::uint32_t connect(BlockId src, BlockId dst, std::uint32_t dst_port = 0) {
    wires_.push_back(Wire{{src, 0}, {dst, dst_port}});
    return static_cast<std::uint32_t>(wires_.size() - 1);
  }

  void expose_input(BlockId block, std::uint32_t port = 0) { inputs_.push_back({block, port}); }

  void expose_output(BlockId block, std::string name = {}) {
    outputs_.push_back(OutputSpec{{block, 0}, std::move(name)});
  }

  Model build() && {
    return validate_and_order(std::move(blocks_), std::move(wires_), std::move(inputs_),
                              std::move(outputs_));
  }

  Model build() const& {
    return validate_and_order(blocks_, wires_, inputs_, outputs_);
  }

private:
  std::vector<Block> blocks_;
  std::vector<Wire> wires_;
  std::vector<PortRef> inputs_;
  std::vector<OutputSpec> outputs_;
};

} // namespace cosim
