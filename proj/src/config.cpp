/* Copyright 2026 The fliqs Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "fliqs/config.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "fliqs/error.hpp"

namespace fliqs {

using nlohmann::json;

namespace {

json default_document() {
  const DataConfig data;
  const SearchConfig search;
  const ControllerParams& ctl = search.controller;
  const TrainerParams& tr = search.trainer;
  const SynthSpec spec;
  const json null;
  return json{
      {"seed", 0},
      {"output_dir", "runs"},
      {"log_level", "info"},
      {"model", "cnn-small"},
      {"data",
       {{"kind", data.kind},
        {"seed", data.seed},
        {"train_size", data.train_size},
        {"test_size", data.test_size},
        {"classes", data.classes},
        {"dims", data.dims},
        {"n_per_class", data.n_per_class},
        {"test_per_class", data.test_per_class},
        {"separation", data.separation},
        {"train_images", null},
        {"train_labels", null},
        {"test_images", null},
        {"test_labels", null},
        {"dir", null}}},
      {"search",
       {{"search_space", search.search_space},
        {"formats", json::array()},
        {"total_steps", search.total_steps},
        {"act_quant_start_fraction", search.act_quant_start_fraction},
        {"gamma", search.gamma},
        {"train_weights", search.train_weights},
        {"cost_target",
         {{"gbops", null},
          {"low", format_name(search.cost_target.low)},
          {"high", format_name(search.cost_target.high)},
          {"mix", search.cost_target.mix}}}}},
      {"controller",
       {{"lr", ctl.lr},
        {"beta_end", ctl.beta_end},
        {"schedule", ctl.schedule == BetaSchedule::Cosine ? "cosine" : "constant"},
        {"warmup_fraction", ctl.warmup_fraction},
        {"ema_decay", ctl.ema_decay},
        {"optimizer", ctl.optimizer == PolicyOptimizer::Adam ? "adam" : "sgd"},
        {"adam_beta1", ctl.adam_beta1},
        {"adam_beta2", ctl.adam_beta2},
        {"adam_eps", ctl.adam_eps}}},
      {"trainer",
       {{"lr", tr.sgd.lr},
        {"momentum", tr.sgd.momentum},
        {"weight_decay", tr.sgd.weight_decay},
        {"cosine_lr", tr.cosine_lr},
        {"batch_size", tr.batch_size},
        {"val_batch_size", tr.val_batch_size},
        {"validation_fraction", tr.validation_fraction},
        {"calibration_batches", tr.calibration_batches},
        {"clip_multiples", {{"low", tr.clip.low}, {"mid", tr.clip.mid}, {"high", tr.clip.high}}},
        {"quantize", tr.quantize}}},
      {"uniform", {{"format", "INT8"}}},
      {"sweep",
       {{"targets_gbops", json::array()},
        {"target_mixes", {0.25, 0.5, 0.75}},
        {"seeds", {0}},
        {"formats", {"E1M6", "E2M5", "E3M4", "E4M3", "E5M2"}}}},
      {"analysis",
       {{"distribution", distribution_name(spec.distribution)},
        {"outlier_rate", spec.outlier_rate},
        {"outlier_scale", spec.outlier_scale},
        {"tensor_size", spec.tensor_size},
        {"trials", spec.trials},
        {"seed", spec.seed},
        {"k1", {4, 5, 6, 7, 8}},
        {"k2", 8},
        {"threshold_rule", threshold_rule_name(ThresholdRule::Percentile999)},
        {"formats", {"INT4", "INT8"}},
        {"percentiles", json::array()},
        {"clipping_trials", 100},
        {"trace", null}}},
  };
}

std::string type_name(const json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "boolean";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  return "object";
}

void check_type(const json& schema, const json& value, const std::string& path) {
  if (schema.is_null()) {
    if (value.is_null() || value.is_string() || value.is_number()) return;
  } else if (path == "model") {
    if (value.is_string() || value.is_object()) return;
  } else if (schema.is_number()) {
    if (value.is_number()) return;
  } else if (type_name(schema) == type_name(value)) {
    return;
  }
  throw SchemaError("config key '" + path + "': expected " + (schema.is_null() ? "string or number" : type_name(schema)) +
                    ", got " + type_name(value));
}

void merge(json& base, const json& user, const std::string& prefix) {
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw SchemaError("unknown config key '" + path + "'");
    json& slot = base[key];
    check_type(slot, value, path);
    if (slot.is_object() && value.is_object() && path != "model") {
      merge(slot, value, path);
    } else {
      slot = value;
    }
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw SchemaError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::string walked;
  std::stringstream parts(path);
  std::string part;
  std::vector<std::string> keys;
  while (std::getline(parts, part, '.')) keys.push_back(part);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    walked += (i ? "." : "") + keys[i];
    if (!node->is_object() || !node->contains(keys[i]) || (walked == "model" && i + 1 < keys.size())) {
      throw SchemaError("unknown config key '" + path + "'");
    }
    node = &(*node)[keys[i]];
  }
  check_type(*node, value, path);
  if (node->is_object() && value.is_object() && path != "model") {
    merge(*node, value, path);
  } else {
    *node = value;
  }
}

const json& at(const json& obj, const std::string& key) { return obj.at(key); }

std::uint64_t get_uint(const json& obj, const std::string& key, const std::string& path) {
  const json& v = at(obj, key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d == static_cast<double>(static_cast<std::uint64_t>(d))) return static_cast<std::uint64_t>(d);
  }
  throw SchemaError("config key '" + path + "." + key + "': expected a non-negative integer");
}

double get_double(const json& obj, const std::string& key) { return at(obj, key).get<double>(); }

std::string get_string_or_empty(const json& obj, const std::string& key, const std::string& path) {
  const json& v = at(obj, key);
  if (v.is_null()) return {};
  if (!v.is_string()) throw SchemaError("config key '" + path + "." + key + "': expected a string");
  return v.get<std::string>();
}

std::vector<NumericFormat> get_formats(const json& obj, const std::string& key, const std::string& path) {
  std::vector<NumericFormat> out;
  for (const auto& v : at(obj, key)) {
    if (!v.is_string()) throw SchemaError("config key '" + path + "." + key + "': expected format strings");
    out.push_back(parse_format(v.get<std::string>()));
  }
  return out;
}

std::vector<double> get_numbers(const json& obj, const std::string& key, const std::string& path) {
  std::vector<double> out;
  for (const auto& v : at(obj, key)) {
    if (!v.is_number()) throw SchemaError("config key '" + path + "." + key + "': expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

void check_level(const std::string& level) {
  static const char* kLevels[] = {"trace", "debug", "info", "warn", "error", "off"};
  for (const char* l : kLevels) {
    if (level == l) return;
  }
  throw SchemaError("config key 'log_level': unknown level '" + level + "'");
}

RunConfig parse_resolved(const json& doc) {
  RunConfig rc;
  rc.resolved_json = doc.dump(2);
  rc.seed = get_uint(doc, "seed", "");
  rc.output_dir = doc.at("output_dir").get<std::string>();
  rc.log_level = doc.at("log_level").get<std::string>();
  check_level(rc.log_level);
  if (doc.at("model").is_string()) {
    rc.model_preset = doc.at("model").get<std::string>();
  } else {
    rc.model = parse_model_config(doc.at("model").dump());
  }

  const json& d = doc.at("data");
  DataConfig& dc = rc.data;
  dc.kind = d.at("kind").get<std::string>();
  dc.seed = get_uint(d, "seed", "data");
  dc.train_size = get_uint(d, "train_size", "data");
  dc.test_size = get_uint(d, "test_size", "data");
  dc.classes = get_uint(d, "classes", "data");
  dc.dims = get_uint(d, "dims", "data");
  dc.n_per_class = get_uint(d, "n_per_class", "data");
  dc.test_per_class = get_uint(d, "test_per_class", "data");
  dc.separation = get_double(d, "separation");
  dc.train_images = get_string_or_empty(d, "train_images", "data");
  dc.train_labels = get_string_or_empty(d, "train_labels", "data");
  dc.test_images = get_string_or_empty(d, "test_images", "data");
  dc.test_labels = get_string_or_empty(d, "test_labels", "data");
  dc.dir = get_string_or_empty(d, "dir", "data");
  if (dc.kind != "synth-digits" && dc.kind != "synth-blobs" && dc.kind != "idx" && dc.kind != "mnist") {
    throw SchemaError("config key 'data.kind': unknown dataset kind '" + dc.kind +
                      "' (synth-digits, synth-blobs, idx, mnist)");
  }

  SearchConfig& sc = rc.search;
  const json& s = doc.at("search");
  sc.search_space = s.at("search_space").get<std::string>();
  sc.formats = get_formats(s, "formats", "search");
  if (sc.formats.empty()) search_space(sc.search_space);
  sc.total_steps = get_uint(s, "total_steps", "search");
  sc.act_quant_start_fraction = get_double(s, "act_quant_start_fraction");
  sc.gamma = get_double(s, "gamma");
  sc.train_weights = s.at("train_weights").get<bool>();
  const json& ct = s.at("cost_target");
  if (!ct.at("gbops").is_null()) {
    if (!ct.at("gbops").is_number()) throw SchemaError("config key 'search.cost_target.gbops': expected a number");
    sc.cost_target.gbops = ct.at("gbops").get<double>();
  }
  sc.cost_target.low = parse_format(ct.at("low").get<std::string>());
  sc.cost_target.high = parse_format(ct.at("high").get<std::string>());
  sc.cost_target.mix = get_double(ct, "mix");

  const json& c = doc.at("controller");
  ControllerParams& cp = sc.controller;
  cp.lr = get_double(c, "lr");
  cp.beta_end = get_double(c, "beta_end");
  cp.schedule = parse_beta_schedule(c.at("schedule").get<std::string>());
  cp.warmup_fraction = get_double(c, "warmup_fraction");
  cp.ema_decay = get_double(c, "ema_decay");
  cp.optimizer = parse_policy_optimizer(c.at("optimizer").get<std::string>());
  cp.adam_beta1 = get_double(c, "adam_beta1");
  cp.adam_beta2 = get_double(c, "adam_beta2");
  cp.adam_eps = get_double(c, "adam_eps");

  const json& t = doc.at("trainer");
  TrainerParams& tp = sc.trainer;
  tp.sgd.lr = get_double(t, "lr");
  tp.sgd.momentum = get_double(t, "momentum");
  tp.sgd.weight_decay = get_double(t, "weight_decay");
  tp.cosine_lr = t.at("cosine_lr").get<bool>();
  tp.batch_size = get_uint(t, "batch_size", "trainer");
  tp.val_batch_size = get_uint(t, "val_batch_size", "trainer");
  tp.validation_fraction = get_double(t, "validation_fraction");
  tp.calibration_batches = get_uint(t, "calibration_batches", "trainer");
  const json& cm = t.at("clip_multiples");
  tp.clip = ClipMultiples{get_double(cm, "low"), get_double(cm, "mid"), get_double(cm, "high")};
  tp.quantize = t.at("quantize").get<bool>();
  sc.seed = rc.seed;

  rc.uniform_format = parse_format(doc.at("uniform").at("format").get<std::string>());

  const json& w = doc.at("sweep");
  rc.sweep.targets_gbops = get_numbers(w, "targets_gbops", "sweep");
  rc.sweep.target_mixes = get_numbers(w, "target_mixes", "sweep");
  for (const auto& v : w.at("seeds")) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      throw SchemaError("config key 'sweep.seeds': expected non-negative integers");
    }
    rc.sweep.seeds.push_back(v.get<std::uint64_t>());
  }
  rc.sweep.formats = get_formats(w, "formats", "sweep");

  const json& a = doc.at("analysis");
  AnalysisConfig& ac = rc.analysis;
  ac.spec.distribution = parse_distribution(a.at("distribution").get<std::string>());
  ac.spec.outlier_rate = get_double(a, "outlier_rate");
  ac.spec.outlier_scale = get_double(a, "outlier_scale");
  ac.spec.tensor_size = get_uint(a, "tensor_size", "analysis");
  ac.spec.trials = get_uint(a, "trials", "analysis");
  ac.spec.seed = get_uint(a, "seed", "analysis");
  ac.spec.validate();
  for (const auto& v : a.at("k1")) {
    if (!v.is_number_integer()) throw SchemaError("config key 'analysis.k1': expected integers");
    ac.k1.push_back(v.get<int>());
  }
  ac.k2 = static_cast<int>(get_uint(a, "k2", "analysis"));
  ac.rule = parse_threshold_rule(a.at("threshold_rule").get<std::string>());
  ac.formats = get_formats(a, "formats", "analysis");
  ac.percentiles = get_numbers(a, "percentiles", "analysis");
  ac.clipping_trials = get_uint(a, "clipping_trials", "analysis");
  ac.trace = get_string_or_empty(a, "trace", "analysis");
  return rc;
}

}  // namespace

std::string default_config_json() { return default_document().dump(2); }

RunConfig resolve_config(const std::string& document, std::span<const std::string> overrides,
                         std::optional<std::uint64_t> seed) {
  json doc = default_document();
  if (!document.empty()) {
    json user;
    try {
      user = json::parse(document);
    } catch (const json::parse_error& e) {
      throw SchemaError("config is not valid JSON (byte " + std::to_string(e.byte) + ")");
    }
    if (!user.is_object()) throw SchemaError("config must be a JSON object");
    merge(doc, user, "");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  if (seed) doc["seed"] = *seed;
  try {
    return parse_resolved(doc);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
}

RunConfig load_config(const std::optional<std::filesystem::path>& path, std::span<const std::string> overrides,
                      std::optional<std::uint64_t> seed) {
  std::string text;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw SchemaError("cannot open config '" + path->string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return resolve_config(text, overrides, seed);
}

LoadedData load_data(const DataConfig& cfg) {
  LoadedData out;
  if (cfg.kind == "synth-digits") {
    out.train = synth_digits(cfg.train_size, cfg.seed);
    if (cfg.test_size > 0) out.test = synth_digits(cfg.test_size, cfg.seed + 1);
  } else if (cfg.kind == "synth-blobs") {
    if (cfg.classes < 2) throw ParamError("data.classes must be at least 2");
    out.train = synth_blobs(cfg.classes, cfg.dims, cfg.n_per_class, cfg.separation, cfg.seed);
    if (cfg.test_per_class > 0) {
      // Same class means (same seed) with fresh noise: tail of a larger draw.
      Dataset both = synth_blobs(cfg.classes, cfg.dims, cfg.n_per_class + cfg.test_per_class, cfg.separation,
                                 cfg.seed);
      std::vector<std::size_t> tail;
      for (std::size_t i = cfg.classes * cfg.n_per_class; i < both.size(); ++i) tail.push_back(i);
      out.test = subset(both, tail);
    }
  } else if (cfg.kind == "idx") {
    if (cfg.train_images.empty() || cfg.train_labels.empty()) {
      throw ConfigError("data.kind 'idx' needs data.train_images and data.train_labels");
    }
    out.train = load_idx(cfg.train_images, cfg.train_labels);
    if (!cfg.test_images.empty() || !cfg.test_labels.empty()) {
      if (cfg.test_images.empty() || cfg.test_labels.empty()) {
        throw ConfigError("data.test_images and data.test_labels must be given together");
      }
      out.test = load_idx(cfg.test_images, cfg.test_labels);
    }
  } else {
    Dataset train, test;
    if (cfg.dir.empty() || !find_mnist(cfg.dir, train, test)) {
      throw ConfigError("data.kind 'mnist' needs data.dir holding the MNIST IDX files");
    }
    out.train = std::move(train);
    if (test.size() > 0) out.test = std::move(test);
  }
  if (cfg.kind == "idx" || cfg.kind == "mnist") {
    if (cfg.train_size > 0 && cfg.train_size < out.train.size()) out.train = head(out.train, cfg.train_size);
    if (out.test && cfg.test_size > 0 && cfg.test_size < out.test->size()) out.test = head(*out.test, cfg.test_size);
  }
  if (out.test && out.test->classes > out.train.classes) out.train.classes = out.test->classes;
  if (out.test) out.test->classes = out.train.classes;
  return out;
}

ModelConfig resolve_model(const RunConfig& cfg, const Dataset& train) {
  if (cfg.model) return *cfg.model;
  return preset_model(cfg.model_preset, train.example_shape(), train.classes);
}

std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& command,
                                   std::uint64_t seed) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &utc);
  const std::string base = command + "-" + stamp + "-" + std::to_string(seed);
  std::filesystem::create_directories(root);
  for (int suffix = 0;; ++suffix) {
    const auto dir = root / (suffix == 0 ? base : base + "-" + std::to_string(suffix));
    if (std::filesystem::create_directory(dir)) return dir;
  }
}

std::filesystem::path output_root(const std::optional<std::string>& flag, const RunConfig& cfg) {
  if (flag) return *flag;
  if (const char* env = std::getenv("FLIQS_OUT"); env != nullptr && *env != '\0') return env;
  return cfg.output_dir;
}

}  // namespace fliqs
