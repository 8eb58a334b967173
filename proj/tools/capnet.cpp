#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "capnet/metrics.hpp"
#include "capnet/run_config.hpp"
#include "capnet/scenario.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace capnet;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<ScenarioFile> load_data(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("data directory " + dir.string() + " does not exist");
  auto files = load_scenario_dir(dir);
  if (files.empty()) throw std::runtime_error("no scenario files in " + dir.string());
  return files;
}

// ---- generate

struct GenerateArgs {
  std::uint64_t seed = 1;
  std::string kinds = "straight,curve,intersection";
  std::size_t count = 0;
  std::size_t agents = 1;
  std::size_t states = 24;
  fs::path out;
};

int cmd_generate(const GenerateArgs& a) {
  std::vector<ScenarioKind> kinds;
  for (const auto& k : split_list(a.kinds)) kinds.push_back(parse_kind(k));
  if (kinds.empty()) throw UsageError("--kinds is empty");
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec || !fs::is_directory(a.out)) throw std::runtime_error("cannot create output directory " + a.out.string());

  GeneratorOptions opts;
  opts.states_per_track = a.states;
  Rng rng(a.seed);
  nlohmann::ordered_json manifest;
  manifest["seed"] = a.seed;
  manifest["count"] = a.count;
  manifest["agents"] = a.agents;
  manifest["states_per_track"] = a.states;
  auto& list = manifest["scenarios"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < a.count; ++i) {
    const ScenarioKind kind = kinds[i % kinds.size()];
    const std::uint64_t s = rng.next();
    char id[32];
    std::snprintf(id, sizeof id, "scene_%05zu", i);
    save_scenario(a.out / (std::string(id) + ".json"), generate_scenario(s, kind, a.agents, opts));
    list.push_back({{"id", id}, {"file", std::string(id) + ".json"}, {"kind", kind_name(kind)}, {"seed", s}});
  }
  write_text(a.out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << a.count << " scenarios to " << a.out.string() << "\n";
  return 0;
}

// ---- train

struct TrainArgs {
  fs::path config, data, out, log;
  std::size_t epochs = 0;
  std::size_t threads = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int cmd_train(const TrainArgs& a) {
  RunConfig rc = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (a.epochs > 0) rc.train.epochs = a.epochs;
  if (a.threads > 0) rc.train.threads = a.threads;
  if (a.seed_set) rc.train.seed = a.seed;
  rc.validate();

  const auto split = split_scenarios(load_data(a.data), rc.train.val_fraction, rc.seed());
  const StandardizationStats stats = compute_stats(split.train, rc.model.sample);
  const Dataset train_set = build_dataset(split.train, rc.model.sample, stats, rc.drop_out_of_map);
  const Dataset val_set = build_dataset(split.val, rc.model.sample, stats, rc.drop_out_of_map);
  if (train_set.samples.empty()) {
    throw std::runtime_error("no training samples: tracks need at least rho + tau = " +
                             std::to_string(rc.model.sample.rho + rc.model.sample.tau) + " states");
  }
  std::cout << "train: " << split.train.size() << " scenarios, " << train_set.samples.size() << " samples; val: "
            << split.val.size() << " scenarios, " << val_set.samples.size() << " samples\n";

  const fs::path log_path = a.log.empty() ? fs::path(a.out.string() + ".log") : a.log;
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot write " + log_path.string());
  auto on_epoch = [&](const EpochLog& e) {
    char line[256];
    std::snprintf(line, sizeof line, "epoch %zu lr %.3g train_loss %.6f val_loss %.6f val_ade_4s %.6f\n", e.epoch,
                  e.lr, e.train_loss, e.val_loss, e.val_ade);
    log << line << std::flush;
    std::cout << line << std::flush;
  };
  const TrainResult result = train(rc.model, rc.train, train_set.samples, val_set.samples, stats, on_epoch);
  save_checkpoint(a.out, result.best);
  std::cout << "saved epoch " << result.best_epoch << " to " << a.out.string() << "\n";
  return 0;
}

// ---- eval

struct EvalArgs {
  fs::path ckpt, config, data, report;
  std::string baseline;
  std::size_t threads = 1;
};

int cmd_eval(const EvalArgs& a) {
  if (a.ckpt.empty() == a.baseline.empty()) throw UsageError("give exactly one of --ckpt or --baseline");
  if (!a.baseline.empty() && a.baseline != "cvh" && a.baseline != "oracle") {
    throw UsageError("--baseline must be cvh or oracle");
  }
  std::optional<RunConfig> rc;
  if (!a.config.empty()) rc = load_run_config(a.config);

  MetricsReport report;
  const auto files = load_data(a.data);
  if (!a.ckpt.empty()) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    if (rc) {
      const std::string field = first_mismatch(rc->model, ckpt.params.config);
      if (!field.empty()) throw std::runtime_error("config mismatch: '" + field + "' differs from the checkpoint");
    }
    const Dataset ds = build_dataset(files, ckpt.params.config.sample, ckpt.stats, rc && rc->drop_out_of_map);
    if (ds.samples.empty()) throw std::runtime_error("no samples: tracks are shorter than rho + tau of the checkpoint");
    report = evaluate_model(a.ckpt.filename().string(), ckpt.params, ds.samples, a.threads);
  } else {
    const SampleConfig sc = rc ? rc->model.sample : SampleConfig{};
    const Dataset ds = build_dataset(files, sc, {}, rc && rc->drop_out_of_map);
    if (ds.samples.empty()) throw std::runtime_error("no samples: tracks are shorter than rho + tau");
    report = a.baseline == "cvh" ? evaluate_cvh(ds.samples) : evaluate_oracle(ds.samples);
  }
  const std::vector<MetricsReport> reports{report};
  const std::string table = report_table(reports);
  std::cout << table;
  if (!a.report.empty()) {
    write_text(a.report, report_json(report));
    fs::path txt = a.report;
    txt.replace_extension(".txt");
    if (txt == a.report) txt += ".txt";
    write_text(txt, table);
  }
  return 0;
}

// ---- rasterize

struct RasterizeArgs {
  fs::path data, out, config;
  std::string scenario, agent;
  std::vector<double> times;
};

int cmd_rasterize(const RasterizeArgs& a) {
  const RasterConfig cfg = a.config.empty() ? RasterConfig{} : load_run_config(a.config).model.sample.raster;
  const fs::path file = a.data / (a.scenario + ".json");
  if (!fs::exists(file)) throw std::runtime_error("unknown scenario '" + a.scenario + "' in " + a.data.string());
  const Scenario sc = load_scenario(file);
  const Track* track = sc.find_track(a.agent);
  if (track == nullptr) throw std::runtime_error("unknown agent '" + a.agent + "' in scenario " + a.scenario);
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec || !fs::is_directory(a.out)) throw std::runtime_error("cannot create output directory " + a.out.string());

  std::size_t written = 0;
  for (double t : a.times) {
    const AgentState* st = nullptr;
    for (const auto& s : track->states) {
      if (std::abs(s.t - t) < 1e-6) st = &s;
    }
    if (st == nullptr) {
      throw std::runtime_error("agent '" + a.agent + "' has no state at t = " + std::to_string(t));
    }
    const ChunkStack stack = rasterize_chunk_stack(sc.map, *st, track->length_m, track->width_m, cfg);
    char stamp[32];
    std::snprintf(stamp, sizeof stamp, "t%.1f", t);
    for (std::size_t l = 0; l < kLayerCount; ++l) {
      const std::string name = a.scenario + "_" + a.agent + "_" + stamp + "_" +
                               std::string(layer_name(static_cast<SemanticLayer>(l))) + ".pgm";
      write_pgm((a.out / name).string(), stack.channel(l), stack.side);
      ++written;
    }
    if (stack.out_of_map) std::cerr << "warning: chunk at t = " << t << " extends beyond the map\n";
  }
  std::cout << "wrote " << written << " images to " << a.out.string() << "\n";
  return 0;
}

// ---- inspect

int cmd_inspect(const fs::path& path) {
  const Checkpoint c = load_checkpoint(path);
  std::cout << "checkpoint " << path.string() << "\n";
  std::cout << "format version " << kCheckpointVersion << "\n";
  std::cout << "config " << model_config_json(c.params.config) << "\n";
  std::cout << "tensors:\n";
  for (const num::Parameter* p : c.params.parameters()) {
    std::cout << "  " << p->name << " " << num::shape_string(p->shape) << " " << p->size() << "\n";
  }
  std::cout << "backbone parameters " << c.params.backbone_count() << "\n";
  std::cout << "total parameters " << c.params.parameter_count() << "\n";
  std::cout << "standardization (vx, vy, ax, ay, yaw):\n";
  std::cout << "  mean  ";
  for (double m : c.stats.mean) std::cout << " " << m;
  std::cout << "\n  stddev";
  for (double s : c.stats.stddev) std::cout << " " << s;
  std::cout << "\ntraining " << c.training_summary << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Capsule-network trajectory prediction on rasterized maps"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker thread cap")->check(CLI::PositiveNumber);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write synthetic scenario files and a manifest");
  g->add_option("--seed", gen.seed, "Root seed");
  g->add_option("--kinds", gen.kinds, "Comma list of straight, curve, intersection");
  g->add_option("--count", gen.count, "Number of scenarios")->required();
  g->add_option("--agents", gen.agents, "Agents per scenario")->check(CLI::PositiveNumber);
  g->add_option("--states", gen.states, "States per track at 2 Hz")->check(CLI::PositiveNumber);
  g->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a predictor");
  t->add_option("--config", tr.config, "Run configuration (JSON)");
  t->add_option("--data", tr.data, "Scenario directory")->required();
  t->add_option("--out", tr.out, "Checkpoint path")->required();
  t->add_option("--log", tr.log, "Epoch log path (default: <out>.log)");
  t->add_option("--epochs", tr.epochs, "Override the configured epochs");
  auto* seed_opt = t->add_option("--seed", tr.seed, "Override the configured seed");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint or a physics baseline");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint");
  e->add_option("--baseline", ev.baseline, "cvh or oracle");
  e->add_option("--config", ev.config, "Run configuration to check against the checkpoint");
  e->add_option("--data", ev.data, "Scenario directory")->required();
  e->add_option("--report", ev.report, "JSON report path; the table goes next to it as .txt");

  RasterizeArgs ra;
  auto* r = app.add_subcommand("rasterize", "Write the five chunk layers of one agent as PGM images");
  r->add_option("--data", ra.data, "Scenario directory")->required();
  r->add_option("--scenario", ra.scenario, "Scenario id (file stem)")->required();
  r->add_option("--agent", ra.agent, "Agent id")->required();
  r->add_option("--t", ra.times, "Time stamp(s) in seconds")->required();
  r->add_option("--out", ra.out, "Output directory")->required();
  r->add_option("--config", ra.config, "Run configuration for the raster settings");

  fs::path inspect_path;
  auto* in = app.add_subcommand("inspect", "Summarize a checkpoint");
  in->add_option("--ckpt", inspect_path, "Checkpoint")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (t->parsed()) {
      tr.threads = threads;
      tr.seed_set = seed_opt->count() > 0;
      return cmd_train(tr);
    }
    if (e->parsed()) {
      ev.threads = threads > 0 ? threads : 1;
      return cmd_eval(ev);
    }
    if (r->parsed()) return cmd_rasterize(ra);
    if (in->parsed()) return cmd_inspect(inspect_path);
  } catch (const UsageError& ex) {
    std::cerr << "capnet: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "capnet: error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
