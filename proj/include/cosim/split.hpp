#pragma once

#include "cosim/model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cosim {

enum class CutDirection { MasterToFollower, FollowerToMaster };

struct CutWire {
  std::uint32_t wire = 0; // index into the source model's wires
  CutDirection direction = CutDirection::MasterToFollower;
};

/// The wires to sever. Cutting them must leave exactly two block groups, one
/// per role, with no surviving cross-group wire; the declared directions must
/// agree on which group is the master.
struct CutSet {
  std::vector<CutWire> wires;
};

/// Where one original output column is sourced during a co-simulated run.
struct OutputSource {
  bool from_master = true;
  // from_master: block id in the master model whose signal is the column.
  // otherwise: slot in the follower's reply array.
  std::size_t index = 0;
};

/// Everything needed to run one model as a master/follower pair. Exchange
/// arrays are ordered by ascending cut-wire index per direction; the reply
/// additionally carries follower-side output columns after the cut slots.
struct SplitPlan {
  Model master_model;
  Model follower_model;
  std::string channel_name;

  std::size_t n_m2f = 0;     // master payload width
  std::size_t n_f2m_cut = 0; // reply slots feeding master External blocks
  std::size_t n_f2m = 0;     // total reply width (cut slots + carried columns)

  std::vector<BlockId> m2f_sources;          // master-model block per payload slot
  std::vector<OutputSource> output_sources;  // per original output
  std::vector<std::string> column_names;     // original output names

  // Bookkeeping in source-model terms.
  std::vector<std::uint32_t> m2f_wires;
  std::vector<std::uint32_t> f2m_wires;
  std::vector<std::size_t> carried_outputs;
};

/// Partitions `model` along `cut`. Throws NotABipartition when the cut does
/// not produce a consistent two-group partition, CapacityExceeded past the
/// 1800/600 exchange limits, InvalidArgument for out-of-range or duplicate
/// wire indices or a model with external inputs.
SplitPlan split(const Model& model, const CutSet& cut, std::string channel_name = {});

/// The equivalence oracle: the same single-process model with every cut wire
/// replaced by a unit delay (initial output 0). Surviving wires keep their
/// indices; delay blocks and rerouting wires are appended.
Model reference_with_delays(const Model& model, const CutSet& cut);

/// Cut file format: {"wires": [{"wire": N, "dir": "m2f"|"f2m"}, ...]}.
std::string cut_to_json(const CutSet& cut);
CutSet cut_from_json(const std::string& text);
void save_cut(const CutSet& cut, const std::filesystem::path& path);
CutSet load_cut(const std::filesystem::path& path);

} // namespace cosim
