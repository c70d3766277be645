#include "cosim/model.hpp"

#include "cosim/error.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace cosim {

namespace {

void check_kind_params(const Block& b) {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::InvalidModel,
                "block " + std::to_string(b.id) + " (" + kind_name(b.kind) + "): " + what);
  };
  auto finite = [&](double v, const char* name) {
    if (!std::isfinite(v)) fail(std::string(name) + " must be finite");
  };

  if (const auto* c = std::get_if<Constant>(&b.kind)) {
    finite(c->value, "value");
  } else if (const auto* g = std::get_if<Gain>(&b.kind)) {
    finite(g->k, "k");
  } else if (const auto* s = std::get_if<Sum>(&b.kind)) {
    if (s->signs.empty()) fail("sum needs at least one sign");
    for (int sg : s->signs)
      if (sg != 1 && sg != -1) fail("signs must be +1 or -1");
  } else if (const auto* l = std::get_if<Limiter>(&b.kind)) {
    finite(l->lo, "lo");
    finite(l->hi, "hi");
    if (l->lo > l->hi) fail("lo must not exceed hi");
  } else if (const auto* st = std::get_if<Step>(&b.kind)) {
    finite(st->t0, "t0");
    finite(st->before, "before");
    finite(st->after, "after");
  } else if (const auto* i = std::get_if<Integrator>(&b.kind)) {
    finite(i->initial, "initial");
  } else if (const auto* f = std::get_if<FirstOrderLag>(&b.kind)) {
    finite(f->gain, "gain");
    finite(f->initial, "initial");
    if (!(f->time_constant > 0.0) || !std::isfinite(f->time_constant))
      fail("time constant must be positive and finite");
  } else if (const auto* u = std::get_if<UnitDelay>(&b.kind)) {
    finite(u->initial, "initial");
  }
}

std::string port_desc(const std::vector<Block>& blocks, BlockId b, std::uint32_t p) {
  return "input port " + std::to_string(p) + " of block " + std::to_string(b) + " (" +
         kind_name(blocks[b].kind) + ")";
}

} // namespace

const PortDriver& Model::driver(BlockId b, std::uint32_t p) const { return drivers_[b][p]; }

std::vector<double> Model::initial_state() const {
  std::vector<double> state(num_states_, 0.0);
  for (const Block& b : blocks_) {
    const std::uint32_t slot = state_slot_[b.id];
    if (slot == kNoState) continue;
    if (const auto* i = std::get_if<Integrator>(&b.kind))
      state[slot] = i->initial;
    else if (const auto* f = std::get_if<FirstOrderLag>(&b.kind))
      state[slot] = f->initial;
    else if (const auto* u = std::get_if<UnitDelay>(&b.kind))
      state[slot] = u->initial;
  }
  return state;
}

Model validate_and_order(std::vector<Block> blocks, std::vector<Wire> wires,
                         std::vector<PortRef> inputs, std::vector<OutputSpec> outputs) {
  const std::size_t n = blocks.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (blocks[i].id != i)
      throw Error(ErrorCode::InvalidModel,
                  "block ids must be dense 0..N-1 in order; slot " + std::to_string(i) + " holds id " +
                      std::to_string(blocks[i].id));
    check_kind_params(blocks[i]);
  }

  std::vector<std::vector<PortDriver>> drivers(n);
  for (std::size_t i = 0; i < n; ++i)
    drivers[i].resize(arity(blocks[i].kind));

  auto check_port = [&](const PortRef& r, bool is_input_port, const char* what) {
    if (r.block >= n)
      throw Error(ErrorCode::InvalidModel,
                  std::string(what) + " references nonexistent block " + std::to_string(r.block));
    const std::size_t limit = is_input_port ? arity(blocks[r.block].kind) : 1;
    if (r.port >= limit)
      throw Error(ErrorCode::InvalidModel, std::string(what) + " references out-of-range port " +
                                               std::to_string(r.port) + " of block " +
                                               std::to_string(r.block));
  };

  for (std::size_t w = 0; w < wires.size(); ++w) {
    check_port(wires[w].src, false, "wire src");
    check_port(wires[w].dst, true, "wire dst");
    PortDriver& d = drivers[wires[w].dst.block][wires[w].dst.port];
    if (d.is_wire() || d.is_external())
      throw Error(ErrorCode::DuplicateDrive,
                  port_desc(blocks, wires[w].dst.block, wires[w].dst.port) + " is driven more than once");
    d.wire = static_cast<std::uint32_t>(w);
  }

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    check_port(inputs[i], true, "model input");
    PortDriver& d = drivers[inputs[i].block][inputs[i].port];
    if (d.is_wire() || d.is_external())
      throw Error(ErrorCode::DuplicateDrive,
                  port_desc(blocks, inputs[i].block, inputs[i].port) + " is both wired and a model input");
    d.external = static_cast<std::uint32_t>(i);
  }

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < drivers[b].size(); ++p)
      if (!drivers[b][p].is_wire() && !drivers[b][p].is_external())
        throw Error(ErrorCode::DanglingPort, port_desc(blocks, static_cast<BlockId>(b),
                                                       static_cast<std::uint32_t>(p)) +
                                                 " has no driver");
    // External blocks are resolved from outside; a wired one would silently
    // shadow the exchange binding.
    if (std::holds_alternative<External>(blocks[b].kind) && !drivers[b][0].is_external())
      throw Error(ErrorCode::InvalidModel, "external block " + std::to_string(b) +
                                               " must be fed from the model inputs, not a wire");
  }

  for (std::size_t i = 0; i < outputs.size(); ++i) {
    check_port(outputs[i].port, false, "model output");
    if (outputs[i].name.empty()) outputs[i].name = "y" + std::to_string(i);
  }

  // Dependency edges: wires whose src is a memory block impose no ordering.
  std::vector<std::vector<BlockId>> succ(n);
  std::vector<std::uint32_t> indegree(n, 0);
  for (const Wire& w : wires) {
    if (is_memory_kind(blocks[w.src.block].kind)) continue;
    succ[w.src.block].push_back(w.dst.block);
    ++indegree[w.dst.block];
  }

  std::priority_queue<BlockId, std::vector<BlockId>, std::greater<>> ready;
  for (std::size_t b = 0; b < n; ++b)
    if (indegree[b] == 0) ready.push(static_cast<BlockId>(b));

  std::vector<BlockId> order;
  order.reserve(n);
  while (!ready.empty()) {
    const BlockId b = ready.top();
    ready.pop();
    order.push_back(b);
    for (BlockId s : succ[b])
      if (--indegree[s] == 0) ready.push(s);
  }

  if (order.size() != n) {
    // Blocks on a stuck cycle are all non-memory (memory blocks have no
    // outgoing dependency edges). Every stuck block has a stuck predecessor,
    // so walking predecessors must revisit a block and close a cycle.
    std::vector<bool> stuck(n, false);
    std::vector<std::vector<BlockId>> pred(n);
    for (std::size_t b = 0; b < n; ++b)
      if (indegree[b] > 0) stuck[b] = true;
    for (const Wire& w : wires) {
      if (is_memory_kind(blocks[w.src.block].kind)) continue;
      if (stuck[w.src.block] && stuck[w.dst.block]) pred[w.dst.block].push_back(w.src.block);
    }

    BlockId cur = 0;
    for (std::size_t b = 0; b < n; ++b)
      if (stuck[b]) { cur = static_cast<BlockId>(b); break; }

    std::vector<BlockId> path;
    std::vector<std::uint32_t> pos_in_path(n, PortDriver::kNone);
    while (pos_in_path[cur] == PortDriver::kNone) {
      pos_in_path[cur] = static_cast<std::uint32_t>(path.size());
      path.push_back(cur);
      cur = pred[cur].front();
    }

    // path[pos..] lists the cycle against edge direction; present it forward.
    std::ostringstream msg;
    msg << "cycle with no memory block: " << cur;
    for (std::size_t i = path.size(); i-- > pos_in_path[cur];)
      msg << " -> " << path[i];
    throw Error(ErrorCode::AlgebraicLoop, msg.str());
  }

  Model m;
  m.blocks_ = std::move(blocks);
  m.wires_ = std::move(wires);
  m.inputs_ = std::move(inputs);
  m.outputs_ = std::move(outputs);
  m.eval_order_ = std::move(order);
  m.drivers_ = std::move(drivers);
  m.state_slot_.assign(n, Model::kNoState);
  std::uint32_t next_slot = 0;
  for (std::size_t b = 0; b < n; ++b)
    if (is_memory_kind(m.blocks_[b].kind)) m.state_slot_[b] = next_slot++;
  m.num_states_ = next_slot;
  return m;
}

} // namespace cosim
