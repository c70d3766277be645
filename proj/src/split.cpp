#include "cosim/split.hpp"

#include "cosim/error.hpp"
#include "cosim/shm.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>

namespace cosim {

namespace {

void check_cut_indices(const Model& model, const CutSet& cut) {
  std::vector<bool> seen(model.wires().size(), false);
  for (const CutWire& cw : cut.wires) {
    if (cw.wire >= model.wires().size())
      throw Error(ErrorCode::InvalidArgument, "cut wire index " + std::to_string(cw.wire) +
                                                  " out of range");
    if (seen[cw.wire])
      throw Error(ErrorCode::InvalidArgument,
                  "cut lists wire " + std::to_string(cw.wire) + " more than once");
    seen[cw.wire] = true;
  }
}

struct DisjointSet {
  std::vector<std::uint32_t> parent;

  explicit DisjointSet(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) { parent[find(a)] = find(b); }
};

} // namespace

SplitPlan split(const Model& model, const CutSet& cut, std::string channel_name) {
  check_cut_indices(model, cut);
  if (!model.inputs().empty())
    throw Error(ErrorCode::InvalidArgument, "cannot split a model that has external inputs");

  const std::size_t n = model.num_blocks();
  std::vector<bool> is_cut(model.wires().size(), false);
  for (const CutWire& cw : cut.wires)
    is_cut[cw.wire] = true;

  // Components of the block graph once cut wires are removed.
  DisjointSet components(n);
  for (std::size_t w = 0; w < model.wires().size(); ++w)
    if (!is_cut[w]) components.unite(model.wires()[w].src.block, model.wires()[w].dst.block);

  // Role evidence per component from the declared cut directions. A component
  // marked both ways means a surviving wire still joins the two halves (or
  // the directions contradict each other).
  std::vector<std::uint8_t> mark(n, 0); // bit 0: master, bit 1: follower
  auto mark_component = [&](BlockId b, std::uint8_t bit) { mark[components.find(b)] |= bit; };
  for (const CutWire& cw : cut.wires) {
    const Wire& w = model.wires()[cw.wire];
    const bool m2f = cw.direction == CutDirection::MasterToFollower;
    mark_component(w.src.block, m2f ? 1 : 2);
    mark_component(w.dst.block, m2f ? 2 : 1);
  }

  std::vector<bool> in_follower(n, false);
  bool any_master = false, any_follower = false;
  for (std::size_t b = 0; b < n; ++b) {
    const std::uint8_t m = mark[components.find(static_cast<std::uint32_t>(b))];
    if (m == 3)
      throw Error(ErrorCode::NotABipartition,
                  "cut leaves block " + std::to_string(b) + " connected to both groups");
    in_follower[b] = (m == 2);
    (in_follower[b] ? any_follower : any_master) = true;
  }
  if (!any_master || !any_follower)
    throw Error(ErrorCode::NotABipartition, "cut does not separate the model into two groups");

  SplitPlan plan;
  plan.channel_name = std::move(channel_name);

  // Slot order: ascending cut-wire index per direction.
  for (std::size_t w = 0; w < model.wires().size(); ++w) {
    if (!is_cut[w]) continue;
    const Wire& wire = model.wires()[w];
    if (in_follower[wire.dst.block])
      plan.m2f_wires.push_back(static_cast<std::uint32_t>(w));
    else
      plan.f2m_wires.push_back(static_cast<std::uint32_t>(w));
  }
  for (std::size_t i = 0; i < model.outputs().size(); ++i)
    if (in_follower[model.outputs()[i].port.block]) plan.carried_outputs.push_back(i);

  plan.n_m2f = plan.m2f_wires.size();
  plan.n_f2m_cut = plan.f2m_wires.size();
  plan.n_f2m = plan.n_f2m_cut + plan.carried_outputs.size();
  if (plan.n_m2f > wire_layout::kMaxInputs)
    throw Error(ErrorCode::CapacityExceeded,
                std::to_string(plan.n_m2f) + " master-to-follower signals exceed " +
                    std::to_string(wire_layout::kMaxInputs));
  if (plan.n_f2m > wire_layout::kMaxOutputs)
    throw Error(ErrorCode::CapacityExceeded,
                std::to_string(plan.n_f2m) + " follower-to-master signals exceed " +
                    std::to_string(wire_layout::kMaxOutputs));

  // Dense renumbering per side, ascending original id.
  constexpr BlockId kUnmapped = static_cast<BlockId>(-1);
  std::vector<BlockId> to_master(n, kUnmapped), to_follower(n, kUnmapped);
  std::vector<Block> master_blocks, follower_blocks;
  for (std::size_t b = 0; b < n; ++b) {
    auto& map = in_follower[b] ? to_follower : to_master;
    auto& blocks = in_follower[b] ? follower_blocks : master_blocks;
    map[b] = static_cast<BlockId>(blocks.size());
    blocks.push_back(Block{map[b], model.blocks()[b].kind});
  }

  std::vector<Wire> master_wires, follower_wires;
  for (std::size_t w = 0; w < model.wires().size(); ++w) {
    if (is_cut[w]) continue;
    const Wire& wire = model.wires()[w];
    if (in_follower[wire.src.block])
      follower_wires.push_back(Wire{{to_follower[wire.src.block], 0},
                                    {to_follower[wire.dst.block], wire.dst.port}});
    else
      master_wires.push_back(Wire{{to_master[wire.src.block], 0},
                                  {to_master[wire.dst.block], wire.dst.port}});
  }

  // Master half: one External per follower->master cut slot.
  std::vector<PortRef> master_inputs;
  for (std::size_t j = 0; j < plan.f2m_wires.size(); ++j) {
    const Wire& wire = model.wires()[plan.f2m_wires[j]];
    const BlockId ext = static_cast<BlockId>(master_blocks.size());
    master_blocks.push_back(Block{ext, External{static_cast<std::uint32_t>(j)}});
    master_wires.push_back(Wire{{ext, 0}, {to_master[wire.dst.block], wire.dst.port}});
    master_inputs.push_back({ext, 0});
  }

  std::vector<OutputSpec> master_outputs;
  for (std::size_t i = 0; i < model.outputs().size(); ++i) {
    const OutputSpec& o = model.outputs()[i];
    plan.column_names.push_back(o.name);
    if (in_follower[o.port.block]) {
      const std::size_t carrier =
          static_cast<std::size_t>(std::find(plan.carried_outputs.begin(), plan.carried_outputs.end(), i) -
                                   plan.carried_outputs.begin());
      plan.output_sources.push_back({false, plan.n_f2m_cut + carrier});
    } else {
      plan.output_sources.push_back({true, to_master[o.port.block]});
      master_outputs.push_back(OutputSpec{{to_master[o.port.block], 0}, o.name});
    }
  }
  for (std::uint32_t w : plan.m2f_wires)
    plan.m2f_sources.push_back(to_master[model.wires()[w].src.block]);

  // Follower half: one External per master->follower cut slot; outputs are
  // the reply array (cut sources first, then carried columns).
  std::vector<PortRef> follower_inputs;
  for (std::size_t i = 0; i < plan.m2f_wires.size(); ++i) {
    const Wire& wire = model.wires()[plan.m2f_wires[i]];
    const BlockId ext = static_cast<BlockId>(follower_blocks.size());
    follower_blocks.push_back(Block{ext, External{static_cast<std::uint32_t>(i)}});
    follower_wires.push_back(Wire{{ext, 0}, {to_follower[wire.dst.block], wire.dst.port}});
    follower_inputs.push_back({ext, 0});
  }

  std::vector<OutputSpec> follower_outputs;
  for (std::size_t j = 0; j < plan.f2m_wires.size(); ++j) {
    const Wire& wire = model.wires()[plan.f2m_wires[j]];
    follower_outputs.push_back(
        OutputSpec{{to_follower[wire.src.block], 0}, "__f2m" + std::to_string(j)});
  }
  for (std::size_t i : plan.carried_outputs)
    follower_outputs.push_back(
        OutputSpec{{to_follower[model.outputs()[i].port.block], 0}, model.outputs()[i].name});

  plan.master_model = validate_and_order(std::move(master_blocks), std::move(master_wires),
                                         std::move(master_inputs), std::move(master_outputs));
  plan.follower_model = validate_and_order(std::move(follower_blocks), std::move(follower_wires),
                                           std::move(follower_inputs), std::move(follower_outputs));
  return plan;
}

Model reference_with_delays(const Model& model, const CutSet& cut) {
  check_cut_indices(model, cut);

  std::vector<Block> blocks = model.blocks();
  std::vector<Wire> wires = model.wires();

  std::vector<std::uint32_t> indices;
  for (const CutWire& cw : cut.wires)
    indices.push_back(cw.wire);
  std::sort(indices.begin(), indices.end());

  for (std::uint32_t w : indices) {
    const PortRef src = wires[w].src;
    const BlockId delay = static_cast<BlockId>(blocks.size());
    blocks.push_back(Block{delay, UnitDelay{0.0}});
    wires[w].src = {delay, 0};          // delayed value reaches the old consumer
    wires.push_back(Wire{src, {delay, 0}}); // old source now feeds the delay
  }

  return validate_and_order(std::move(blocks), std::move(wires), model.inputs(), model.outputs());
}

std::string cut_to_json(const CutSet& cut) {
  nlohmann::json doc;
  doc["wires"] = nlohmann::json::array();
  for (const CutWire& cw : cut.wires)
    doc["wires"].push_back(
        {{"wire", cw.wire},
         {"dir", cw.direction == CutDirection::MasterToFollower ? "m2f" : "f2m"}});
  return doc.dump(2);
}

CutSet cut_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("cut JSON parse error: ") + e.what());
  }
  try {
    CutSet cut;
    for (const nlohmann::json& jw : doc.at("wires")) {
      CutWire cw;
      cw.wire = jw.at("wire").get<std::uint32_t>();
      const std::string dir = jw.at("dir").get<std::string>();
      if (dir == "m2f")
        cw.direction = CutDirection::MasterToFollower;
      else if (dir == "f2m")
        cw.direction = CutDirection::FollowerToMaster;
      else
        throw Error(ErrorCode::InvalidArgument, "cut direction must be 'm2f' or 'f2m', got '" + dir + "'");
      cut.wires.push_back(cw);
    }
    return cut;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed cut: ") + e.what());
  }
}

void save_cut(const CutSet& cut, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  f << cut_to_json(cut) << '\n';
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

CutSet load_cut(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return cut_from_json(text);
}

} // namespace cosim
