#include "cosim/model_json.hpp"

#include "cosim/error.hpp"

#include <json.hpp>

#include <fstream>

namespace cosim {

namespace {

using nlohmann::json;

json kind_params(const BlockKind& kind) {
  json p = json::object();
  if (const auto* c = std::get_if<Constant>(&kind)) {
    p["value"] = c->value;
  } else if (const auto* g = std::get_if<Gain>(&kind)) {
    p["k"] = g->k;
  } else if (const auto* s = std::get_if<Sum>(&kind)) {
    p["signs"] = s->signs;
  } else if (const auto* l = std::get_if<Limiter>(&kind)) {
    p["lo"] = l->lo;
    p["hi"] = l->hi;
  } else if (const auto* st = std::get_if<Step>(&kind)) {
    p["t0"] = st->t0;
    p["before"] = st->before;
    p["after"] = st->after;
  } else if (const auto* i = std::get_if<Integrator>(&kind)) {
    p["initial"] = i->initial;
  } else if (const auto* f = std::get_if<FirstOrderLag>(&kind)) {
    p["gain"] = f->gain;
    p["time_constant"] = f->time_constant;
    p["initial"] = f->initial;
  } else if (const auto* u = std::get_if<UnitDelay>(&kind)) {
    p["initial"] = u->initial;
  } else if (const auto* e = std::get_if<External>(&kind)) {
    p["slot"] = e->slot;
  }
  return p;
}

BlockKind kind_from_json(const std::string& name, const json& p) {
  if (name == "constant") return Constant{p.at("value").get<double>()};
  if (name == "gain") return Gain{p.at("k").get<double>()};
  if (name == "sum") return Sum{p.at("signs").get<std::vector<int>>()};
  if (name == "limiter") return Limiter{p.at("lo").get<double>(), p.at("hi").get<double>()};
  if (name == "step")
    return Step{p.at("t0").get<double>(), p.at("before").get<double>(), p.at("after").get<double>()};
  if (name == "integrator") return Integrator{p.at("initial").get<double>()};
  if (name == "first_order_lag")
    return FirstOrderLag{p.at("gain").get<double>(), p.at("time_constant").get<double>(),
                         p.at("initial").get<double>()};
  if (name == "unit_delay") return UnitDelay{p.at("initial").get<double>()};
  if (name == "sine") return Sine{};
  if (name == "product") return Product{};
  if (name == "external") return External{p.at("slot").get<std::uint32_t>()};
  throw Error(ErrorCode::InvalidModel, "unknown block kind '" + name + "'");
}

json port_to_json(const PortRef& r) { return json::array({r.block, r.port}); }

PortRef port_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2)
    throw Error(ErrorCode::InvalidModel, "port reference must be [block, port]");
  return PortRef{j[0].get<BlockId>(), j[1].get<std::uint32_t>()};
}

} // namespace

std::string model_to_json(const Model& model) {
  json doc;
  doc["blocks"] = json::array();
  for (const Block& b : model.blocks())
    doc["blocks"].push_back({{"id", b.id}, {"kind", kind_name(b.kind)}, {"params", kind_params(b.kind)}});
  doc["wires"] = json::array();
  for (const Wire& w : model.wires())
    doc["wires"].push_back({{"src", port_to_json(w.src)}, {"dst", port_to_json(w.dst)}});
  doc["inputs"] = json::array();
  for (const PortRef& r : model.inputs())
    doc["inputs"].push_back({{"block", r.block}, {"port", r.port}});
  doc["outputs"] = json::array();
  for (const OutputSpec& o : model.outputs())
    doc["outputs"].push_back({{"block", o.port.block}, {"port", o.port.port}, {"name", o.name}});
  return doc.dump(2);
}

Model model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("model JSON parse error: ") + e.what());
  }

  try {
    std::vector<Block> blocks;
    for (const json& jb : doc.at("blocks")) {
      Block b;
      b.id = jb.at("id").get<BlockId>();
      b.kind = kind_from_json(jb.at("kind").get<std::string>(),
                              jb.contains("params") ? jb["params"] : json::object());
      blocks.push_back(std::move(b));
    }
    std::vector<Wire> wires;
    for (const json& jw : doc.at("wires"))
      wires.push_back(Wire{port_from_json(jw.at("src")), port_from_json(jw.at("dst"))});
    std::vector<PortRef> inputs;
    if (doc.contains("inputs"))
      for (const json& ji : doc["inputs"])
        inputs.push_back(PortRef{ji.at("block").get<BlockId>(), ji.at("port").get<std::uint32_t>()});
    std::vector<OutputSpec> outputs;
    if (doc.contains("outputs"))
      for (const json& jo : doc["outputs"]) {
        OutputSpec o;
        o.port = PortRef{jo.at("block").get<BlockId>(), jo.at("port").get<std::uint32_t>()};
        o.name = jo.value("name", "");
        outputs.push_back(std::move(o));
      }
    return validate_and_order(std::move(blocks), std::move(wires), std::move(inputs), std::move(outputs));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidModel, std::string("malformed model JSON: ") + e.what());
  }
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
  const std::string text = model_to_json(model);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  f << '\n';
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return model_from_json(text);
}

} // namespace cosim
