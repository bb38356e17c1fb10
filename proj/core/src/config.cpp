// SPDX-License-Identifier: Apache-2.0
#include "msgan/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include "msgan/errors.hpp"

namespace msgan {
namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError("unknown config key: " + where + key);
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

BaseModelConfig RunConfig::base_config() const {
  if (preset == "toy") return BaseModelConfig::toy();
  if (preset == "micro") return BaseModelConfig::micro();
  throw ConfigError("unknown preset: " + preset + " (expected toy or micro)");
}

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
  pretrain.seed = s;
  dataset.seed = s;
}

void RunConfig::validate() const {
  const BaseModelConfig base = base_config();
  train.validate();
  train.resolve_mask(base.generator.schedule);
  inversion.validate();
  pretrain.validate();
  try {
    dataset.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (dataset.resolution != base.generator.resolution())
    throw ConfigError("dataset resolution must equal the generator resolution");
  if (eval.inputs < 1) throw ConfigError("eval.inputs must be >= 1");
  if (bench.iterations < 0) throw ConfigError("bench.iterations must be >= 0");
  for (int n : bench.styles)
    if (n < 1) throw ConfigError("bench.styles entries must be >= 1");
}

RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig c;
  try {
    check_keys(j, {"seed", "preset", "output_dir", "mask", "train", "loss", "inversion", "reference_inversion", "pretrain",
                   "dataset", "eval", "bench"},
               "");
    read(j, "preset", c.preset);
    read(j, "output_dir", c.output_dir);
    c.dataset.resolution = c.base_config().generator.resolution();
    if (j.contains("mask")) {
      const auto& m = j.at("mask");
      check_keys(m, {"start", "bits"}, "mask.");
      if (m.contains("start") && m.contains("bits")) throw ConfigError("mask: give either start or bits, not both");
      read(m, "start", c.train.mask_start);
      read(m, "bits", c.train.mask_bits);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      check_keys(t, {"iterations", "generator_lr", "stn_lr", "beta1", "beta2", "stn_init", "snapshot_every",
                     "style_chunk"},
                 "train.");
      nlohmann::json merged = c.train;
      for (const auto& [k, v] : t.items()) merged[k] = v;
      from_json(merged, c.train);
    }
    if (j.contains("loss")) {
      check_keys(j.at("loss"), {"contextual_weight", "contextual_bandwidth", "tap_weights", "contextual_tap",
                                "identity_weight"},
                 "loss.");
      from_json(j.at("loss"), c.train.loss);
    }
    for (const char* key : {"inversion", "reference_inversion"}) {
      if (!j.contains(key)) continue;
      check_keys(j.at(key),
                 {"steps", "step_size", "pixel_weight", "feature_weight", "init", "target_space", "mean_samples"},
                 std::string(key) + ".");
      from_json(j.at(key), std::string(key) == "inversion" ? c.inversion : c.train.inversion);
    }
    if (j.contains("pretrain")) {
      check_keys(j.at("pretrain"), {"steps", "batch", "generator_lr", "discriminator_lr", "mapping_lr_scale", "beta1",
                                    "beta2", "gp_gamma", "gp_step", "log_every", "probe_count"},
                 "pretrain.");
      from_json(j.at("pretrain"), c.pretrain);
    }
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      check_keys(d, {"count", "max_shapes", "palette_range", "gradient_strength"}, "dataset.");
      read(d, "count", c.dataset.count);
      read(d, "max_shapes", c.dataset.max_shapes);
      read(d, "palette_range", c.dataset.palette_range);
      read(d, "gradient_strength", c.dataset.gradient_strength);
    }
    if (j.contains("eval")) {
      check_keys(j.at("eval"), {"inputs", "input_seed"}, "eval.");
      read(j.at("eval"), "inputs", c.eval.inputs);
      read(j.at("eval"), "input_seed", c.eval.input_seed);
    }
    if (j.contains("bench")) {
      check_keys(j.at("bench"), {"iterations", "styles"}, "bench.");
      read(j.at("bench"), "iterations", c.bench.iterations);
      read(j.at("bench"), "styles", c.bench.styles);
    }
    std::uint64_t seed = 0;
    read(j, "seed", seed);
    c.apply_seed(seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

nlohmann::json resolved_json(const RunConfig& c) {
  const nlohmann::json train = c.train;
  nlohmann::json j;
  j["seed"] = c.seed;
  j["preset"] = c.preset;
  j["output_dir"] = c.output_dir;
  if (c.train.mask_bits.empty()) j["mask"] = {{"start", c.train.mask_start}};
  else j["mask"] = {{"bits", c.train.mask_bits}};
  j["train"] = {{"iterations", c.train.iterations},   {"generator_lr", c.train.generator_lr},
                {"stn_lr", c.train.stn_lr},           {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},             {"stn_init", train.at("stn_init")},
                {"snapshot_every", c.train.snapshot_every}, {"style_chunk", c.train.style_chunk}};
  j["loss"] = c.train.loss;
  j["inversion"] = c.inversion;
  j["reference_inversion"] = c.train.inversion;
  nlohmann::json pre = c.pretrain;
  pre.erase("seed");
  j["pretrain"] = pre;
  j["dataset"] = {{"count", c.dataset.count},
                  {"max_shapes", c.dataset.max_shapes},
                  {"palette_range", c.dataset.palette_range},
                  {"gradient_strength", c.dataset.gradient_strength}};
  j["eval"] = {{"inputs", c.eval.inputs}, {"input_seed", c.eval.input_seed}};
  j["bench"] = {{"iterations", c.bench.iterations}, {"styles", c.bench.styles}};
  return j;
}

}  // namespace msgan
