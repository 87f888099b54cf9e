#include "funet/model.hpp"

#include <json.hpp>

namespace funet {

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["depth"] = depth;
  j["base_channels"] = base_channels;
  j["use_wa"] = use_wa;
  j["use_ds"] = use_ds;
  std::vector<std::string> heads{"enhancement"};
  if (head_minutia) heads.push_back("minutia");
  if (head_orientation) heads.push_back("orientation");
  j["heads"] = heads;
  j["input_h"] = input_h;
  j["input_w"] = input_w;
  j["seed"] = seed;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("ModelConfig: bad JSON: ") + e.what());
  }
  ModelConfig cfg;
  cfg.depth = j.value("depth", cfg.depth);
  cfg.base_channels = j.value("base_channels", cfg.base_channels);
  cfg.use_wa = j.value("use_wa", cfg.use_wa);
  cfg.use_ds = j.value("use_ds", cfg.use_ds);
  cfg.input_h = j.value("input_h", cfg.input_h);
  cfg.input_w = j.value("input_w", cfg.input_w);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("heads")) {
    cfg.head_minutia = false;
    cfg.head_orientation = false;
    bool has_enh = false;
    for (const auto& h : j["heads"]) {
      const std::string name = h.get<std::string>();
      if (name == "enhancement")
        has_enh = true;
      else if (name == "minutia")
        cfg.head_minutia = true;
      else if (name == "orientation")
        cfg.head_orientation = true;
      else
        throw Error("ModelConfig: unknown head '" + name + "'");
    }
    if (!has_enh) throw Error("ModelConfig: heads must include enhancement");
  }
  cfg.validate();
  return cfg;
}

}  // namespace funet
