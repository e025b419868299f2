#include "nptc/run_config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "nptc/error.hpp"

namespace nptc {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& where,
                    const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.contains(key))
      throw ConfigError("unknown key '" + where + "." + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + where + "." + key + "'");
  }
}

// Number or the string "auto".
std::optional<double> read_auto(const json& obj, const char* key,
                                const std::string& where,
                                std::optional<double> current) {
  if (!obj.contains(key)) return current;
  const auto& v = obj.at(key);
  if (v.is_string() && v.get<std::string>() == "auto") return std::nullopt;
  if (v.is_number()) return v.get<double>();
  throw ConfigError("'" + where + "." + key + "' must be a number or \"auto\"");
}

int axis_of(const std::string& s) {
  if (s == "x") return 0;
  if (s == "y") return 1;
  if (s == "z") return 2;
  throw ConfigError("unknown axis '" + s + "'");
}

const char* axis_name(int a) { return a == 0 ? "x" : a == 1 ? "y" : "z"; }

}  // namespace

RunConfig::RunConfig() {
  // Desk defaults for the 512-point synthetic clouds.
  pipeline.resolution = 24;
  pipeline.ratios = {1.0, 0.25, 0.0625};
}

SeedPolicy parse_seed_policy(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.size() == 2 && parts[0] == "min")
    return SeedPolicy::min_coordinate(axis_of(parts[1]));
  if (parts.size() == 2 && parts[0] == "index") {
    try {
      return SeedPolicy::fixed_index(static_cast<std::uint32_t>(std::stoul(parts[1])));
    } catch (const std::exception&) {
      throw ConfigError("bad seed index in '" + text + "'");
    }
  }
  if (parts.size() == 3 && parts[0] == "face" &&
      (parts[2] == "low" || parts[2] == "high"))
    return SeedPolicy::plane_edge(axis_of(parts[1]), parts[2] == "high");
  throw ConfigError("unknown seed policy '" + text +
                    "' (expected min:<axis>, index:<i> or face:<axis>:<low|high>)");
}

std::string to_string(const SeedPolicy& p) {
  switch (p.kind) {
    case SeedPolicy::Kind::FixedIndex: return "index:" + std::to_string(p.point_index);
    case SeedPolicy::Kind::MinCoordinate: return std::string("min:") + axis_name(p.axis);
    case SeedPolicy::Kind::PlaneEdge:
      return std::string("face:") + axis_name(p.axis) + (p.high_side ? ":high" : ":low");
  }
  return "?";
}

RunConfig parse_run_config(const std::string& json_text, const RunConfig& base) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = base;
  reject_unknown(root, "config", {"pipeline", "network", "train", "paths", "threads"});
  read(root, "threads", "config", c.threads);

  if (root.contains("pipeline")) {
    const auto& p = root.at("pipeline");
    const std::string w = "pipeline";
    reject_unknown(p, w, {"resolution", "epsilon", "seed_policy", "k", "normals",
                          "kernel_taps", "delta", "alpha", "ratios", "fps_start"});
    read(p, "resolution", w, c.pipeline.resolution);
    c.pipeline.epsilon = read_auto(p, "epsilon", w, c.pipeline.epsilon);
    if (p.contains("seed_policy"))
      c.pipeline.seed = parse_seed_policy(p.at("seed_policy").get<std::string>());
    read(p, "k", w, c.pipeline.k);
    if (p.contains("normals")) {
      const auto n = p.at("normals").get<std::string>();
      if (n == "input") c.pipeline.normals = NormalPolicy::UseInput;
      else if (n == "lpca") c.pipeline.normals = NormalPolicy::LpcaCentroidOriented;
      else throw ConfigError("pipeline.normals must be 'input' or 'lpca'");
    }
    read(p, "kernel_taps", w, c.pipeline.kernel.taps_per_axis);
    c.pipeline.kernel.delta = read_auto(p, "delta", w, c.pipeline.kernel.delta);
    read(p, "alpha", w, c.pipeline.kernel.alpha);
    read(p, "ratios", w, c.pipeline.ratios);
    read(p, "fps_start", w, c.pipeline.fps_start);
  }
  c.network.taps_per_axis = c.pipeline.kernel.taps_per_axis;

  if (root.contains("network")) {
    const auto& n = root.at("network");
    const std::string w = "network";
    reject_unknown(n, w, {"task", "num_classes", "widths", "residual_blocks", "head_width"});
    if (n.contains("task")) {
      const auto t = n.at("task").get<std::string>();
      if (t == "classification") c.network.task = Task::Classification;
      else if (t == "segmentation") c.network.task = Task::Segmentation;
      else throw ConfigError("network.task must be classification or segmentation");
    }
    read(n, "num_classes", w, c.network.num_classes);
    read(n, "widths", w, c.network.widths);
    read(n, "residual_blocks", w, c.network.residual_blocks);
    read(n, "head_width", w, c.network.head_width);
  }

  if (root.contains("train")) {
    const auto& t = root.at("train");
    const std::string w = "train";
    reject_unknown(t, w, {"optimizer", "lr", "momentum", "beta1", "beta2", "eps",
                          "clip_norm", "epochs", "batch_size", "seed", "voting_rounds", "augment"});
    if (t.contains("optimizer")) {
      const auto o = t.at("optimizer").get<std::string>();
      if (o == "sgd") c.train.optimizer.kind = OptimizerConfig::Kind::Sgd;
      else if (o == "adam") c.train.optimizer.kind = OptimizerConfig::Kind::Adam;
      else throw ConfigError("train.optimizer must be sgd or adam");
    }
    read(t, "lr", w, c.train.optimizer.lr);
    read(t, "momentum", w, c.train.optimizer.momentum);
    read(t, "beta1", w, c.train.optimizer.beta1);
    read(t, "beta2", w, c.train.optimizer.beta2);
    read(t, "eps", w, c.train.optimizer.eps);
    read(t, "clip_norm", w, c.train.optimizer.clip_norm);
    read(t, "epochs", w, c.train.epochs);
    read(t, "batch_size", w, c.train.batch_size);
    read(t, "seed", w, c.train.seed);
    read(t, "voting_rounds", w, c.train.voting_rounds);
    if (t.contains("augment")) {
      const auto& a = t.at("augment");
      const std::string wa = "train.augment";
      reject_unknown(a, wa, {"enabled", "rotation", "scale_min", "scale_max", "jitter"});
      read(a, "enabled", wa, c.train.augment.enabled);
      read(a, "rotation", wa, c.train.augment.rotation);
      read(a, "scale_min", wa, c.train.augment.scale_min);
      read(a, "scale_max", wa, c.train.augment.scale_max);
      read(a, "jitter", wa, c.train.augment.jitter);
    }
  }

  if (root.contains("paths")) {
    const auto& p = root.at("paths");
    reject_unknown(p, "paths", {"dataset", "output", "cache"});
    read(p, "dataset", "paths", c.dataset_dir);
    read(p, "output", "paths", c.output_dir);
    read(p, "cache", "paths", c.cache_dir);
  }

  if (c.train.optimizer.lr < 0.0) throw ConfigError("train.lr must be >= 0");
  if (c.train.voting_rounds < 1) throw ConfigError("train.voting_rounds must be >= 1");
  if (c.pipeline.resolution < 1) throw ConfigError("pipeline.resolution must be positive");
  if (c.network.widths.size() != c.pipeline.ratios.size())
    throw ConfigError("network.widths needs one entry per pipeline.ratios level");
  c.network.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw CacheMiss("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), base);
}

std::string dump_run_config(const RunConfig& c) {
  json root;
  const auto& p = c.pipeline;
  root["pipeline"] = {
      {"resolution", p.resolution},
      {"epsilon", p.resolved_epsilon()},
      {"seed_policy", to_string(p.seed)},
      {"k", p.k},
      {"normals", p.normals == NormalPolicy::UseInput ? "input" : "lpca"},
      {"kernel_taps", p.kernel.taps_per_axis},
      {"alpha", p.kernel.alpha},
      {"ratios", p.ratios},
      {"fps_start", p.fps_start}};
  if (p.kernel.delta) root["pipeline"]["delta"] = *p.kernel.delta;
  else root["pipeline"]["delta"] = "auto";
  const auto& n = c.network;
  root["network"] = {
      {"task", n.task == Task::Classification ? "classification" : "segmentation"},
      {"num_classes", n.num_classes},
      {"widths", n.widths},
      {"residual_blocks", n.residual_blocks},
      {"head_width", n.head_width}};
  const auto& t = c.train;
  root["train"] = {
      {"optimizer", t.optimizer.kind == OptimizerConfig::Kind::Sgd ? "sgd" : "adam"},
      {"lr", t.optimizer.lr},
      {"momentum", t.optimizer.momentum},
      {"beta1", t.optimizer.beta1},
      {"beta2", t.optimizer.beta2},
      {"eps", t.optimizer.eps},
      {"clip_norm", t.optimizer.clip_norm},
      {"epochs", t.epochs},
      {"batch_size", t.batch_size},
      {"seed", t.seed},
      {"voting_rounds", t.voting_rounds},
      {"augment",
       {{"enabled", t.augment.enabled},
        {"rotation", t.augment.rotation},
        {"scale_min", t.augment.scale_min},
        {"scale_max", t.augment.scale_max},
        {"jitter", t.augment.jitter}}}};
  root["paths"] = {{"dataset", c.dataset_dir}, {"output", c.output_dir}, {"cache", c.cache_dir}};
  root["threads"] = c.threads;
  return root.dump(2);
}

}  // namespace nptc
