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

#include "fliqs/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numbers>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "fliqs/rng.hpp"

namespace fliqs {

using nlohmann::json;

double CostTarget::resolve(const ModelManifest& manifest) const {
  if (gbops) {
    if (!(*gbops > 0.0)) throw ParamError("cost target must be positive");
    return *gbops * 1e9;
  }
  if (!(mix >= 0.0 && mix <= 1.0)) throw ParamError("cost target mix must lie in [0, 1]");
  const double lo = uniform_cost(manifest, low), hi = uniform_cost(manifest, high);
  return lo + mix * (hi - lo);
}

std::vector<NumericFormat> SearchConfig::resolved_formats() const {
  return formats.empty() ? fliqs::search_space(search_space) : formats;
}

void SearchConfig::validate() const {
  if (total_steps == 0) throw ConfigError("total_steps must be positive");
  if (!(act_quant_start_fraction > 0.0 && act_quant_start_fraction < 1.0)) {
    throw ConfigError("act_quant_start_fraction must lie in (0, 1)");
  }
  if (!(controller.warmup_fraction > 0.0 && controller.warmup_fraction < 1.0)) {
    throw ConfigError("warmup_fraction must lie in (0, 1)");
  }
  if (resolved_formats().empty()) throw ConfigError("the format option set is empty");
  if (trainer.calibration_batches == 0) throw ConfigError("calibration_batches must be positive");
  if (trainer.val_batch_size == 0) throw ConfigError("val_batch_size must be positive");
}

// ---------------------------------------------------------------------------
// training loop

namespace {

double accuracy_on(const Network& net, std::span<const ArchChoice> archs, const ThresholdTable& table,
                   const QuantPhase& phase, const Batch& batch) {
  ForwardOptions opt;
  opt.archs = archs;
  opt.phase = phase;
  opt.thresholds = &table;
  opt.keep_cache = false;
  const auto fwd = net.forward(batch.x, opt);
  return static_cast<double>(count_correct(fwd.logits, batch.y)) / static_cast<double>(batch.y.size());
}

void check_data(const Network& net, const Dataset& data, const char* which) {
  if (data.size() == 0) throw ConfigError(std::string(which) + " dataset is empty");
  if (Tensor::element_count(data.example_shape()) != Tensor::element_count(net.config().input_shape)) {
    throw ConfigError(std::string(which) + " examples " + shape_string(data.example_shape()) +
                      " do not fit model input " + shape_string(net.config().input_shape));
  }
  if (data.classes > net.classes()) {
    throw ConfigError(std::string(which) + " dataset has " + std::to_string(data.classes) +
                      " classes but the model emits " + std::to_string(net.classes()));
  }
}

ThresholdTable initial_table(const Network& net, std::span<const NumericFormat> formats) {
  ThresholdTable t;
  t.layers.resize(net.weight_layer_count());
  for (std::size_t w = 0; w < net.weight_layer_count(); ++w) {
    std::vector<NumericFormat> fmts(formats.begin(), formats.end());
    if (const auto& f = net.weight_layer(w).fixed_format) fmts.push_back(*f);
    for (const auto& f : fmts) {
      bool seen = false;
      for (const auto& e : t.layers[w]) seen = seen || e.format == f;
      if (!seen) t.layers[w].push_back({f, 0.0, 0.0});
    }
  }
  refresh_weight_thresholds(net, t);
  return t;
}

SearchResult train_loop(const SearchConfig& cfg, const std::vector<ArchChoice>* fixed, const Dataset& data,
                        const Dataset* test, const TraceSink& sink) {
  cfg.validate();
  const std::uint64_t steps = cfg.total_steps;

  SearchResult result;
  result.searched = fixed == nullptr;
  result.net = Network::build(cfg.model, cfg.seed);
  Network& net = result.net;
  check_data(net, data, "training");
  if (test) check_data(net, *test, "test");

  const ModelManifest manifest = net.manifest();
  const RewardParams rp{cfg.cost_target.resolve(manifest), cfg.gamma};
  result.cost_target = rp.cost_target;
  for (std::size_t w : net.searchable_layers()) result.layer_names.push_back(net.weight_layer(w).name);

  std::vector<NumericFormat> formats = cfg.resolved_formats();
  std::vector<LayerPolicy> policies;
  if (fixed) {
    if (fixed->size() != net.searchable_layers().size()) {
      throw ParamError("expected " + std::to_string(net.searchable_layers().size()) +
                       " fixed architecture choices, got " + std::to_string(fixed->size()));
    }
    formats.clear();
    for (const auto& a : *fixed) {
      if (std::find(formats.begin(), formats.end(), a.format) == formats.end()) formats.push_back(a.format);
    }
    for (const auto& a : *fixed) result.options.push_back({a});
  } else {
    for (std::size_t w : net.searchable_layers()) {
      policies.push_back(LayerPolicy::uniform(net.layer_options(w, formats)));
      result.options.push_back(policies.back().options);
    }
  }
  ControllerParams cp = cfg.controller;
  cp.seed = cfg.seed;
  Controller controller(std::move(policies), cp);

  const BatchPlan plan{cfg.trainer.batch_size, cfg.seed, cfg.trainer.validation_fraction};
  const Split split = split_indices(data.size(), plan);
  if (split.validation.empty() && !cfg.quality_oracle) {
    throw ConfigError("validation split is empty; raise validation_fraction or the dataset size");
  }
  const auto val_batches = validation_batches(split, cfg.trainer.val_batch_size);
  std::uint64_t epoch = 0;
  auto epoch_batches = train_batches(split, plan, epoch);
  std::size_t next_batch = 0;

  ThresholdTable table = initial_table(net, formats);
  bool profiled = false;
  auto profile = [&] {
    const auto calib_idx = train_batches(split, plan, 0);
    std::vector<Tensor> calib;
    for (std::size_t b = 0; b < std::min(cfg.trainer.calibration_batches, calib_idx.size()); ++b) {
      calib.push_back(gather(data, calib_idx[b]).x);
    }
    table = profile_thresholds(net, calib, cfg.trainer.clip, formats);
    profiled = true;
  };

  const auto act_start = static_cast<std::uint64_t>(std::floor(cfg.act_quant_start_fraction * static_cast<double>(steps)));
  SgdOptimizer sgd(cfg.trainer.sgd);
  std::vector<ArchChoice> prev;

  for (std::uint64_t t = 0; t < steps; ++t) {
    try {
      const double progress = steps > 1 ? static_cast<double>(t) / static_cast<double>(steps - 1) : 1.0;
      if (t == act_start) profile();
      refresh_weight_thresholds(net, table);
      const QuantPhase phase = cfg.trainer.quantize ? QuantPhase{true, t >= act_start, act_start} : QuantPhase{};

      TraceRecord rec;
      rec.step = t;
      rec.act_quant = phase.act_quant_active;
      std::vector<std::size_t> picked;
      if (fixed) {
        rec.archs = *fixed;
      } else {
        picked = controller.sample(t, progress);
        rec.archs = controller.choices(picked);
        rec.entropy = controller.entropy();
      }

      const double warm = cfg.controller.warmup_fraction;
      const double p_joint = std::max(0.0, 1.0 - progress / warm);
      Rng branch_rng = make_rng(cfg.seed, streams::kKernelBranch, t);
      rec.kernel_joint = uniform01(branch_rng) < p_joint;

      if (cfg.train_weights) {
        if (next_batch == epoch_batches.size()) {
          epoch_batches = train_batches(split, plan, ++epoch);
          next_batch = 0;
        }
        const Batch batch = gather(data, epoch_batches[next_batch++]);
        ForwardOptions opt;
        opt.archs = rec.archs;
        opt.phase = phase;
        opt.thresholds = &table;
        opt.joint_kernels = rec.kernel_joint;
        const auto fwd = net.forward(batch.x, opt);
        const auto bwd = net.backward(fwd, batch.y);
        if (cfg.trainer.cosine_lr) {
          const double frac = static_cast<double>(t) / static_cast<double>(steps);
          sgd.set_lr(cfg.trainer.sgd.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac)));
        }
        sgd.step(net, bwd.grads);
        rec.loss = bwd.loss;
        if (!std::isfinite(rec.loss)) throw NumericalError("training loss is not finite", -1);
        refresh_weight_thresholds(net, table);
      }

      if (cfg.quality_oracle) {
        rec.quality = cfg.quality_oracle(rec.archs);
      } else {
        const Batch vb = gather(data, val_batches[t % val_batches.size()]);
        rec.quality = accuracy_on(net, rec.archs, table, phase, vb);
      }
      rec.cost = model_cost(rec.archs, manifest);
      rec.reward = reward(rec.quality, rec.cost, rp);

      if (!fixed) {
        rec.advantage = controller.advantage_update(rec.reward);
        rec.beta = beta_schedule(progress, cp.beta_end, cp.schedule);
        if (!controller.in_warmup(progress)) {
          controller.reinforce_step(picked, rec.advantage, rec.beta);
          rec.policy_updated = true;
        }
        rec.argmax = controller.argmax();
        for (const auto& p : controller.probabilities()) rec.pmax.push_back(*std::max_element(p.begin(), p.end()));
      } else {
        rec.argmax.assign(rec.archs.size(), 0);
        rec.pmax.assign(rec.archs.size(), 1.0);
      }
      rec.switch_rms = prev.empty() ? 0.0 : weight_switch_rms(net, prev, rec.archs, table);
      prev = rec.archs;

      if (sink) sink(rec);
      if ((t + 1) % std::max<std::uint64_t>(1, steps / 10) == 0) {
        spdlog::info("step {}/{} loss {:.4f} quality {:.4f} cost {:.4g} GBOPs entropy {:.3f}", t + 1, steps,
                     rec.loss, rec.quality, rec.cost / 1e9, rec.entropy);
      }
      result.trace.push_back(std::move(rec));
    } catch (const ConfigError&) {
      throw;
    } catch (const SearchError&) {
      throw;
    } catch (const std::exception& e) {
      throw SearchError(t, e.what());
    }
  }

  if (!profiled) profile();
  round_weights_to_float(net);
  refresh_weight_thresholds(net, table);
  result.thresholds = table;
  if (fixed) {
    result.archs = *fixed;
  } else {
    result.archs = controller.choices(controller.argmax());
    result.probabilities = controller.probabilities();
  }
  result.cost = model_cost(result.archs, manifest);
  if (!split.validation.empty()) {
    result.validation_accuracy =
        evaluate(net, result.archs, table, data, split.validation, cfg.trainer.val_batch_size, cfg.trainer.quantize);
  }
  if (test) {
    std::vector<std::size_t> all(test->size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    result.test_accuracy =
        evaluate(net, result.archs, table, *test, all, cfg.trainer.val_batch_size, cfg.trainer.quantize);
  }
  result.served_accuracy = result.test_accuracy.value_or(result.validation_accuracy);
  return result;
}

}  // namespace

double evaluate(const Network& net, std::span<const ArchChoice> archs, const ThresholdTable& table,
                const Dataset& data, std::span<const std::size_t> indices, std::size_t batch_size, bool quantized) {
  if (indices.empty()) throw ParamError("evaluate: no examples");
  const QuantPhase phase = quantized ? QuantPhase{true, true, 0} : QuantPhase{};
  std::size_t correct = 0;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const auto chunk = indices.subspan(start, std::min(batch_size, indices.size() - start));
    const Batch b = gather(data, chunk);
    correct += static_cast<std::size_t>(std::llround(accuracy_on(net, archs, table, phase, b) *
                                                     static_cast<double>(chunk.size())));
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

SearchResult run_search(const SearchConfig& cfg, const Dataset& data, const Dataset* test, const TraceSink& sink) {
  return train_loop(cfg, nullptr, data, test, sink);
}

SearchResult run_fixed(const SearchConfig& cfg, std::span<const ArchChoice> archs, const Dataset& data,
                       const Dataset* test, const TraceSink& sink) {
  const std::vector<ArchChoice> fixed(archs.begin(), archs.end());
  return train_loop(cfg, &fixed, data, test, sink);
}

SearchResult run_uniform(const SearchConfig& cfg, const NumericFormat& format, const Dataset& data,
                         const Dataset* test, const TraceSink& sink) {
  const Network probe = Network::build(cfg.model, cfg.seed);
  const auto archs = probe.uniform_archs(format);
  return run_fixed(cfg, archs, data, test, sink);
}

// ---------------------------------------------------------------------------
// trace CSV

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string trace_csv_header(std::span<const std::string> layer_names) {
  std::string h = "step,reward,quality,cost_gbops,entropy,beta,loss,advantage,switch_rms,act_quant,kernel_joint,policy_updated";
  for (const auto& n : layer_names) h += ",arch_" + n;
  for (const auto& n : layer_names) h += ",argmax_" + n;
  for (const auto& n : layer_names) h += ",pmax_" + n;
  return h;
}

std::string trace_csv_row(const TraceRecord& r) {
  std::string s = std::to_string(r.step);
  for (double v : {r.reward, r.quality, r.cost / 1e9, r.entropy, r.beta, r.loss, r.advantage, r.switch_rms}) {
    s += "," + g17(v);
  }
  s += r.act_quant ? ",1" : ",0";
  s += r.kernel_joint ? ",1" : ",0";
  s += r.policy_updated ? ",1" : ",0";
  for (const auto& a : r.archs) s += "," + arch_label(a);
  for (auto i : r.argmax) s += "," + std::to_string(i);
  for (double p : r.pmax) s += "," + g17(p);
  return s;
}

// ---------------------------------------------------------------------------
// serving

std::string serve_config(const SearchResult& result) {
  const Network& net = result.net;
  json doc;
  doc["model"] = json::parse(model_config_to_json(net.config()));
  doc["layers"] = json::array();
  doc["fixed_layers"] = json::array();
  std::size_t s = 0;
  for (std::size_t w = 0; w < net.weight_layer_count(); ++w) {
    const auto& l = net.weight_layer(w);
    const ArchChoice arch = l.searchable ? result.archs[s++] : net.identity_arch(w);
    const auto& thr = result.thresholds.lookup(w, arch.format);
    json e;
    e["name"] = l.name;
    e["format"] = format_name(arch.format);
    e["width_mult"] = arch.width_mult;
    if (arch.kernel) e["kernel"] = *arch.kernel;
    e["thresholds"] = {{"activation", thr.activation}, {"weight", thr.weight}};
    doc[l.searchable ? "layers" : "fixed_layers"].push_back(e);
  }
  doc["cost_gbops"] = result.cost / 1e9;
  doc["served_accuracy"] = result.served_accuracy;
  return doc.dump(2);
}

ServedModel parse_served_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("served config: invalid JSON: ") + e.what());
  }
  for (const char* key : {"model", "layers", "fixed_layers"}) {
    if (!doc.contains(key)) throw SchemaError(std::string("served config: missing '") + key + "'");
  }
  ServedModel served;
  served.model = parse_model_config(doc["model"].dump());
  const Network probe = Network::build(served.model, 0);
  const auto& searchable = probe.searchable_layers();
  if (doc["layers"].size() != searchable.size()) {
    throw SchemaError("served config lists " + std::to_string(doc["layers"].size()) + " layers, model has " +
                      std::to_string(searchable.size()) + " searchable layers");
  }
  served.thresholds.layers.resize(probe.weight_layer_count());
  std::size_t s = 0, f = 0;
  for (std::size_t w = 0; w < probe.weight_layer_count(); ++w) {
    const auto& l = probe.weight_layer(w);
    const json& e = l.searchable ? doc["layers"].at(s++) : doc["fixed_layers"].at(f++);
    if (e.at("name").get<std::string>() != l.name) {
      throw SchemaError("served config entry '" + e.at("name").get<std::string>() + "' is out of order; expected '" +
                        l.name + "'");
    }
    ArchChoice a;
    a.format = parse_format(e.at("format").get<std::string>());
    a.width_mult = e.at("width_mult").get<double>();
    if (e.contains("kernel")) a.kernel = e["kernel"].get<int>();
    const auto& thr = e.at("thresholds");
    served.thresholds.layers[w].push_back(
        {a.format, thr.at("activation").get<double>(), thr.at("weight").get<double>()});
    if (l.searchable) served.archs.push_back(a);
  }
  return served;
}

double evaluate_served(const Network& net, const ServedModel& served, const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return evaluate(net, served.archs, served.thresholds, data, all, 256);
}

// ---------------------------------------------------------------------------
// sweeps

std::vector<ParetoRow> pareto_sweep(const SearchConfig& cfg, std::span<const double> targets_bops,
                                    std::span<const std::uint64_t> seeds, const Dataset& data,
                                    const Dataset* test, std::size_t jobs) {
  if (targets_bops.empty()) throw ConfigError("pareto sweep needs at least one cost target");
  if (seeds.empty()) throw ConfigError("pareto sweep needs at least one seed");
  std::vector<ParetoRow> rows;
  for (double t : targets_bops) {
    for (auto s : seeds) rows.push_back({t, s, 0.0, 0.0, {}, {}});
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      auto& row = rows[i];
      SearchConfig c = cfg;
      c.cost_target.gbops = row.target / 1e9;
      c.seed = row.seed;
      try {
        const auto r = run_search(c, data, test);
        row.cost = r.cost;
        row.accuracy = r.served_accuracy;
        row.archs = r.archs;
      } catch (const std::exception& e) {
        row.error = e.what();
        spdlog::error("pareto row target={} seed={} failed: {}", row.target, row.seed, e.what());
      }
    }
  };
  const std::size_t n = std::clamp<std::size_t>(jobs, 1, rows.size());
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < n; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return rows;
}

}  // namespace fliqs
