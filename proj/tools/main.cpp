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

// fliqs command-line entry point.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <thread>

#include "fliqs/analysis.hpp"
#include "fliqs/config.hpp"
#include "fliqs/costmodel.hpp"
#include "fliqs/error.hpp"
#include "fliqs/network.hpp"
#include "fliqs/search.hpp"

namespace fliqs {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Common {
  std::optional<std::string> config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

int g_verbosity = 0;

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "JSON run configuration");
  cmd->add_option("--set", c.sets, "Override a config key, e.g. search.total_steps=200")->take_all();
  cmd->add_option("--seed", c.seed, "Run seed (overrides the config)");
  cmd->add_option("-o,--out", c.out, "Output root (default: FLIQS_OUT, then output_dir)");
}

RunConfig resolve(const Common& c) {
  std::optional<fs::path> path;
  if (c.config) path = *c.config;
  RunConfig rc = load_config(path, c.sets, c.seed);
  auto level = spdlog::level::from_str(rc.log_level);
  if (g_verbosity > 0) level = spdlog::level::debug;
  if (g_verbosity < 0) level = spdlog::level::warn;
  spdlog::set_level(level);
  return rc;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json arch_json(const ArchChoice& a) {
  json j{{"format", format_name(a.format)}, {"width_mult", a.width_mult}, {"label", arch_label(a)}};
  if (a.kernel) j["kernel"] = *a.kernel;
  return j;
}

json result_json(const std::string& command, const RunConfig& rc, const SearchResult& r) {
  json layers = json::array();
  for (std::size_t l = 0; l < r.archs.size(); ++l) {
    json e = arch_json(r.archs[l]);
    e["name"] = r.layer_names[l];
    json opts = json::array();
    for (const auto& o : r.options[l]) opts.push_back(arch_label(o));
    e["options"] = opts;
    if (!r.probabilities.empty()) e["probabilities"] = r.probabilities[l];
    layers.push_back(e);
  }
  json j{{"command", command},
         {"seed", rc.seed},
         {"model", r.net.config().name},
         {"searched", r.searched},
         {"total_steps", r.trace.size()},
         {"layers", layers},
         {"cost_gbops", r.cost / 1e9},
         {"cost_target_gbops", r.cost_target / 1e9},
         {"served_accuracy", r.served_accuracy},
         {"validation_accuracy", r.validation_accuracy},
         {"test_accuracy", r.test_accuracy ? json(*r.test_accuracy) : json()}};
  if (!r.trace.empty()) j["final_entropy"] = r.trace.back().entropy;
  return j;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void run_pool(std::size_t n, std::size_t jobs, Fn fn) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1)); ++j) {
    pool.emplace_back(worker);
  }
  worker();
  for (auto& t : pool) t.join();
}

struct Prepared {
  RunConfig rc;
  LoadedData data;
  SearchConfig cfg;
};

Prepared prepare(const Common& c) {
  Prepared p{resolve(c), {}, {}};
  p.data = load_data(p.rc.data);
  p.cfg = p.rc.search;
  p.cfg.model = resolve_model(p.rc, p.data.train);
  spdlog::info("data: {} training examples{}", p.data.train.size(),
               p.data.test ? ", " + std::to_string(p.data.test->size()) + " test" : std::string());
  return p;
}

// search and uniform share one writer: trace.csv streams during the run so a
// failure leaves the partial trace behind.
int cmd_train(const std::string& command, Common c, const std::optional<std::string>& format) {
  if (format) c.sets.push_back("uniform.format=\"" + *format + "\"");
  Prepared p = prepare(c);
  const fs::path dir = make_run_dir(output_root(c.out, p.rc), command, p.rc.seed);
  write_file(dir / "resolved_config.json", p.rc.resolved_json);

  const Network probe = Network::build(p.cfg.model, p.cfg.seed);
  std::vector<std::string> names;
  for (std::size_t w : probe.searchable_layers()) names.push_back(probe.weight_layer(w).name);
  std::ofstream trace(dir / "trace.csv", std::ios::binary);
  trace << trace_csv_header(names) << '\n';
  const TraceSink sink = [&](const TraceRecord& r) { trace << trace_csv_row(r) << '\n' << std::flush; };

  const Dataset* test = p.data.test ? &*p.data.test : nullptr;
  SearchResult r;
  try {
    r = command == "search" ? run_search(p.cfg, p.data.train, test, sink)
                            : run_uniform(p.cfg, p.rc.uniform_format, p.data.train, test, sink);
  } catch (...) {
    trace.flush();
    std::cout << dir.string() << '\n';
    throw;
  }
  trace.close();
  write_file(dir / "result.json", result_json(command, p.rc, r).dump(2));
  write_file(dir / "served_config.json", serve_config(r));
  save_weights(r.net, dir / "weights.bin");

  for (std::size_t l = 0; l < r.archs.size(); ++l) {
    std::cout << r.layer_names[l] << '\t' << arch_label(r.archs[l]) << '\n';
  }
  std::printf("cost %.6g GBOPs (target %.6g), served accuracy %.4f\n", r.cost / 1e9, r.cost_target / 1e9,
              r.served_accuracy);
  std::cout << dir.string() << '\n';
  return 0;
}

int cmd_sweep(const std::string& kind, const Common& c, std::size_t jobs) {
  Prepared p = prepare(c);
  const auto& sw = p.rc.sweep;
  if (sw.seeds.empty()) throw ConfigError("sweep.seeds is empty");
  const fs::path dir = make_run_dir(output_root(c.out, p.rc), "sweep-" + kind, p.rc.seed);
  write_file(dir / "resolved_config.json", p.rc.resolved_json);
  const Dataset* test = p.data.test ? &*p.data.test : nullptr;
  std::ostringstream csv;
  bool failed = false;

  if (kind == "pareto") {
    std::vector<double> targets;
    if (!sw.targets_gbops.empty()) {
      for (double g : sw.targets_gbops) targets.push_back(g * 1e9);
    } else {
      const ModelManifest m = Network::build(p.cfg.model, 0).manifest();
      for (double mix : sw.target_mixes) {
        CostTarget t = p.cfg.cost_target;
        t.gbops.reset();
        t.mix = mix;
        targets.push_back(t.resolve(m));
      }
    }
    if (targets.empty()) throw ConfigError("sweep needs at least one cost target (sweep.targets_gbops or sweep.target_mixes)");
    const auto rows = pareto_sweep(p.cfg, targets, sw.seeds, p.data.train, test, jobs);
    csv << "target_gbops,seed,cost_gbops,accuracy,archs,error\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = rows[i];
      std::string archs;
      for (const auto& a : row.archs) archs += (archs.empty() ? "" : " ") + arch_label(a);
      csv << g17(row.target / 1e9) << ',' << row.seed << ',' << g17(row.cost / 1e9) << ',' << g17(row.accuracy) << ','
          << archs << ',' << (row.error.empty() ? "" : "\"" + row.error + "\"") << '\n';
      const fs::path rd = dir / ("row" + std::to_string(i));
      fs::create_directories(rd);
      json rj{{"target_gbops", row.target / 1e9}, {"seed", row.seed}, {"cost_gbops", row.cost / 1e9},
              {"accuracy", row.accuracy}, {"error", row.error}};
      rj["archs"] = json::array();
      for (const auto& a : row.archs) rj["archs"].push_back(arch_json(a));
      write_file(rd / "row.json", rj.dump(2));
      failed = failed || !row.error.empty();
    }
  } else {
    if (sw.formats.empty()) throw ConfigError("sweep.formats is empty");
    struct Row {
      NumericFormat format;
      std::uint64_t seed;
      double cost = 0.0, accuracy = 0.0;
      std::string error;
    };
    std::vector<Row> rows;
    for (const auto& f : sw.formats) {
      for (auto s : sw.seeds) rows.push_back(Row{f, s, 0.0, 0.0, {}});
    }
    run_pool(rows.size(), jobs, [&](std::size_t i) {
      auto& row = rows[i];
      SearchConfig cfg = p.cfg;
      cfg.seed = row.seed;
      try {
        const auto r = run_uniform(cfg, row.format, p.data.train, test);
        row.cost = r.cost;
        row.accuracy = r.served_accuracy;
      } catch (const std::exception& e) {
        row.error = e.what();
        spdlog::error("uniform row {} seed {} failed: {}", format_name(row.format), row.seed, e.what());
      }
    });
    csv << "format,seed,cost_gbops,accuracy,error\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = rows[i];
      csv << format_name(row.format) << ',' << row.seed << ',' << g17(row.cost / 1e9) << ',' << g17(row.accuracy)
          << ',' << (row.error.empty() ? "" : "\"" + row.error + "\"") << '\n';
      const fs::path rd = dir / ("row" + std::to_string(i));
      fs::create_directories(rd);
      write_file(rd / "row.json", json{{"format", format_name(row.format)},
                                       {"seed", row.seed},
                                       {"cost_gbops", row.cost / 1e9},
                                       {"accuracy", row.accuracy},
                                       {"error", row.error}}
                                      .dump(2));
      failed = failed || !row.error.empty();
    }
  }
  write_file(dir / "results.csv", csv.str());
  std::cout << csv.str() << dir.string() << '\n';
  return failed ? 1 : 0;
}

json spec_json(const SynthSpec& s) {
  return {{"distribution", distribution_name(s.distribution)},
          {"outlier_rate", s.outlier_rate},
          {"outlier_scale", s.outlier_scale},
          {"tensor_size", s.tensor_size},
          {"trials", s.trials},
          {"seed", s.seed}};
}

json fit_json(const ExpFit& f) {
  return {{"A", f.A}, {"B", f.B}, {"C", f.C}, {"residual", f.residual}, {"r2", f.r2}, {"iterations", f.iterations}};
}

int cmd_analyze(const std::string& kind, const Common& c, const std::optional<std::string>& trace_flag) {
  const RunConfig rc = resolve(c);
  const AnalysisConfig& ac = rc.analysis;
  if (kind == "entropy") {
    const std::string trace = trace_flag.value_or(ac.trace);
    if (trace.empty()) throw ConfigError("analyze entropy needs --trace or analysis.trace");
    const EntropySeries series = read_entropy_series(trace);
    const double rho = entropy_switch_correlation(series);
    const fs::path dir = make_run_dir(output_root(c.out, rc), "analyze-entropy", ac.spec.seed);
    write_file(dir / "resolved_config.json", rc.resolved_json);
    write_file(dir / "entropy.json",
               json{{"trace", trace}, {"rows", series.entropy.size()}, {"spearman", rho}}.dump(2));
    std::printf("spearman(entropy, switching) = %.6f over %zu rows\n", rho, series.entropy.size());
    std::cout << dir.string() << '\n';
    return 0;
  }

  const fs::path dir = make_run_dir(output_root(c.out, rc), "analyze-" + kind, ac.spec.seed);
  write_file(dir / "resolved_config.json", rc.resolved_json);
  if (kind == "switching") {
    if (ac.k1.empty()) throw ConfigError("analysis.k1 is empty");
    const auto points = switching_sweep(ac.k1, ac.k2, ac.spec, ac.rule);
    std::ostringstream csv;
    csv << "k1,mean,stderr\n";
    std::vector<double> xs, ys;
    for (const auto& pt : points) {
      csv << g17(pt.x) << ',' << g17(pt.mean) << ',' << g17(pt.std_error) << '\n';
      xs.push_back(pt.x);
      ys.push_back(pt.mean);
    }
    write_file(dir / "switching.csv", csv.str());
    json side{{"k2", ac.k2}, {"threshold_rule", threshold_rule_name(ac.rule)}, {"spec", spec_json(ac.spec)}};
    int status = 0;
    if (xs.size() >= 4) {
      try {
        side["fit"] = fit_json(fit_exponential(xs, ys));
      } catch (const FitFailure& e) {
        side["fit"] = fit_json(e.best());
        side["fit_error"] = e.what();
        status = 1;
      }
    }
    write_file(dir / "switching.json", side.dump(2));
    std::cout << csv.str() << dir.string() << '\n';
    return status;
  }
  if (kind == "clipping") {
    if (ac.formats.empty()) throw ConfigError("analysis.formats is empty");
    SynthSpec spec = ac.spec;
    spec.trials = ac.clipping_trials;
    const std::vector<double> grid = ac.percentiles.empty() ? default_percentile_grid() : ac.percentiles;
    std::ostringstream csv;
    csv << "format,percentile,mse,stderr\n";
    json side{{"spec", spec_json(spec)}, {"formats", json::array()}};
    for (const auto& f : ac.formats) {
      const auto r = clipping_sweep(f, spec, grid);
      for (const auto& pt : r.curve) {
        csv << format_name(f) << ',' << g17(pt.x) << ',' << g17(pt.mean) << ',' << g17(pt.std_error) << '\n';
      }
      side["formats"].push_back(
          {{"format", format_name(f)}, {"optimal_percentile", r.optimal_percentile}, {"optimal_mse", r.optimal_mse}});
      std::printf("%s optimal percentile %g (mse %.6g)\n", format_name(f).c_str(), r.optimal_percentile,
                  r.optimal_mse);
    }
    write_file(dir / "clipping.csv", csv.str());
    write_file(dir / "clipping.json", side.dump(2));
    std::cout << dir.string() << '\n';
    return 0;
  }
  throw ConfigError("unknown analysis kind '" + kind + "'");
}

fs::path manifest_path(const std::string& name) {
  if (fs::exists(name)) return name;
  const char* env = std::getenv("FLIQS_DATA_DIR");
  const fs::path root = env != nullptr && *env != '\0' ? fs::path(env) : fs::path(FLIQS_DATA_DIR);
  const fs::path bundled = root / "manifests" / (name + ".json");
  if (fs::exists(bundled)) return bundled;
  throw ConfigError("manifest '" + name + "' is neither a file nor a bundled manifest");
}

int cmd_cost(const std::string& manifest_name, const std::optional<std::string>& format,
             const std::optional<std::string>& assignment, bool as_json) {
  const ModelManifest m = load_manifest(manifest_path(manifest_name));
  if (!format && !assignment) throw ConfigError("cost needs --format or --assignment");
  std::optional<NumericFormat> fallback;
  if (format) fallback = parse_format(*format);
  std::map<std::string, NumericFormat> per_layer;
  if (assignment) {
    std::ifstream in(*assignment);
    if (!in) throw ConfigError("cannot open assignment '" + *assignment + "'");
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw SchemaError("assignment is not valid JSON: " + std::string(e.what()));
    }
    if (!doc.is_object()) throw SchemaError("assignment must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
      if (key == "default") {
        fallback = parse_format(value.get<std::string>());
      } else if (key == "layers") {
        for (const auto& [name, f] : value.items()) per_layer.emplace(name, parse_format(f.get<std::string>()));
      } else {
        throw SchemaError("assignment: unknown key '" + key + "'");
      }
    }
  }
  std::vector<ArchChoice> archs;
  for (const auto& l : m.layers) {
    if (!l.searchable) {
      if (per_layer.contains(l.name)) throw ManifestError("layer '" + l.name + "' is not searchable");
      continue;
    }
    const auto it = per_layer.find(l.name);
    if (it != per_layer.end()) {
      archs.push_back(ArchChoice{it->second, 1.0, std::nullopt});
    } else if (fallback) {
      archs.push_back(ArchChoice{*fallback, 1.0, std::nullopt});
    } else {
      throw ManifestError("assignment does not cover layer '" + l.name + "' and gives no default");
    }
  }
  for (const auto& [name, f] : per_layer) {
    if (std::none_of(m.layers.begin(), m.layers.end(), [&](const LayerSpec& l) { return l.name == name; })) {
      throw ManifestError("assignment names unknown layer '" + name + "'");
    }
  }
  const auto costs = layer_costs(archs, m);
  double total = 0.0;
  json layers = json::array();
  std::size_t s = 0;
  for (const auto& l : m.layers) {
    const NumericFormat f = l.searchable ? archs[s].format : *l.fixed_format;
    const double cost = l.searchable ? costs[s] : layer_cost(ArchChoice{f, 1.0, std::nullopt}, l);
    if (l.searchable) ++s;
    total += cost;
    layers.push_back({{"name", l.name}, {"format", format_name(f)}, {"macs", l.macs}, {"gbops", cost / 1e9}});
  }
  if (as_json) {
    std::cout << json{{"model", m.model_name}, {"layers", layers}, {"total_gbops", total / 1e9}}.dump(2) << '\n';
  } else {
    for (const auto& e : layers) {
      std::printf("%-24s %-6s %14llu MACs %12.6f GBOPs\n", e["name"].get<std::string>().c_str(),
                  e["format"].get<std::string>().c_str(), static_cast<unsigned long long>(e["macs"].get<std::uint64_t>()),
                  e["gbops"].get<double>());
    }
    std::printf("total %.6f GBOPs\n", total / 1e9);
  }
  return 0;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_serve_info(const std::string& served_path, const std::optional<std::string>& weights, const Common& c,
                   bool as_json) {
  const ServedModel served = parse_served_config(read_text(served_path));
  Network net = Network::build(served.model, 0);
  const double cost = model_cost(served.archs, net.manifest());
  json layers = json::array();
  std::size_t s = 0;
  for (std::size_t w = 0; w < net.weight_layer_count(); ++w) {
    const auto& l = net.weight_layer(w);
    const ArchChoice a = l.searchable ? served.archs[s++] : net.identity_arch(w);
    const auto& thr = served.thresholds.lookup(w, a.format);
    json e = arch_json(a);
    e["name"] = l.name;
    e["searchable"] = l.searchable;
    e["activation_threshold"] = thr.activation;
    e["weight_threshold"] = thr.weight;
    layers.push_back(e);
  }
  json out{{"model", served.model.name}, {"layers", layers}, {"cost_gbops", cost / 1e9}};
  if (weights) {
    load_weights(net, *weights);
    const RunConfig rc = resolve(c);
    const LoadedData data = load_data(rc.data);
    const Dataset& eval = data.test ? *data.test : data.train;
    out["accuracy"] = evaluate_served(net, served, eval);
    out["evaluated_on"] = data.test ? "test" : "train";
  }
  if (as_json) {
    std::cout << out.dump(2) << '\n';
    return 0;
  }
  std::printf("model %s, cost %.6g GBOPs\n", served.model.name.c_str(), cost / 1e9);
  for (const auto& e : layers) {
    std::printf("%-16s %-12s act %.6g weight %.6g%s\n", e["name"].get<std::string>().c_str(),
                e["label"].get<std::string>().c_str(), e["activation_threshold"].get<double>(),
                e["weight_threshold"].get<double>(), e["searchable"].get<bool>() ? "" : " (fixed)");
  }
  if (out.contains("accuracy")) {
    std::printf("accuracy %.4f on %s data\n", out["accuracy"].get<double>(), out["evaluated_on"].get<std::string>().c_str());
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"fliqs: one-shot mixed-precision quantization search"};
  app.require_subcommand(1);
  app.fallthrough();
  int verbose = 0, quiet = 0;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  Common search_opts, uniform_opts, sweep_opts, analyze_opts, serve_opts;
  auto* search = app.add_subcommand("search", "Run the one-shot format search");
  add_common(search, search_opts);

  auto* uniform = app.add_subcommand("uniform", "Train with one format everywhere");
  add_common(uniform, uniform_opts);
  std::optional<std::string> uniform_format;
  uniform->add_option("-f,--format", uniform_format, "Format, e.g. INT8 or E4M3");

  auto* sweep = app.add_subcommand("sweep", "Pareto or uniform-format sweeps");
  std::string sweep_kind;
  sweep->add_option("kind", sweep_kind, "pareto | uniform-formats")
      ->required()
      ->check(CLI::IsMember({"pareto", "uniform-formats"}));
  add_common(sweep, sweep_opts);
  std::size_t jobs = 1;
  sweep->add_option("-j,--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);

  auto* analyze = app.add_subcommand("analyze", "Switching, clipping and entropy studies");
  std::string analyze_kind;
  analyze->add_option("kind", analyze_kind, "switching | clipping | entropy")
      ->required()
      ->check(CLI::IsMember({"switching", "clipping", "entropy"}));
  add_common(analyze, analyze_opts);
  std::optional<std::string> trace;
  analyze->add_option("--trace", trace, "Search trace.csv for the entropy study");

  auto* cost = app.add_subcommand("cost", "BOPs of a manifest under a format assignment");
  std::string manifest;
  std::optional<std::string> cost_format, assignment;
  bool cost_json = false;
  cost->add_option("-m,--manifest", manifest, "Manifest file or bundled name (resnet18, mobilenetv2)")->required();
  cost->add_option("-f,--format", cost_format, "Uniform format");
  cost->add_option("-a,--assignment", assignment, "JSON {\"default\": fmt, \"layers\": {name: fmt}}");
  cost->add_flag("--json", cost_json, "Machine-readable output");

  auto* serve = app.add_subcommand("serve-info", "Describe (and optionally evaluate) a served configuration");
  std::string served_path;
  std::optional<std::string> weights;
  bool serve_json = false;
  serve->add_option("served_config", served_path, "served_config.json")->required();
  serve->add_option("-w,--weights", weights, "weights.bin to evaluate with");
  serve->add_flag("--json", serve_json, "Machine-readable output");
  add_common(serve, serve_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  g_verbosity = verbose > 0 ? 1 : (quiet > 0 ? -1 : 0);
  spdlog::set_default_logger(spdlog::stderr_color_mt("fliqs"));
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  spdlog::set_level(g_verbosity > 0 ? spdlog::level::debug : (g_verbosity < 0 ? spdlog::level::warn : spdlog::level::info));

  try {
    if (*search) return cmd_train("search", search_opts, std::nullopt);
    if (*uniform) return cmd_train("uniform", uniform_opts, uniform_format);
    if (*sweep) return cmd_sweep(sweep_kind, sweep_opts, jobs);
    if (*analyze) return cmd_analyze(analyze_kind, analyze_opts, trace);
    if (*cost) return cmd_cost(manifest, cost_format, assignment, cost_json);
    if (*serve) return cmd_serve_info(served_path, weights, serve_opts, serve_json);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 2;
}

}  // namespace
}  // namespace fliqs

int main(int argc, char** argv) { return fliqs::run(argc, argv); }
