// Command-line front end. Every subcommand resolves a RunConfig from defaults,
// an optional --config file and per-key flags, logs it, then runs one stage of
// the pipeline per entity.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <mutex>
#include <sstream>

#include "dghl/baselines.hpp"
#include "dghl/error.hpp"
#include "dghl/parallel.hpp"
#include "dghl/pipeline.hpp"
#include "dghl/rng.hpp"
#include "dghl/synth.hpp"

namespace fs = std::filesystem;
using namespace dghl;

namespace {

std::mutex log_mutex;

void log(const std::string& msg) {
  std::lock_guard lock(log_mutex);
  std::cerr << "[dghl] " << msg << '\n';
}

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

void require_path(const std::string& value, const std::string& key) {
  if (value.empty()) throw ValidationError("missing required setting --" + dashed(key));
}

// Flags override the config file, which overrides defaults. Commands reading a
// trained model start from the config stored next to it.
struct ConfigSources {
  std::string config_file;
  std::map<std::string, std::string> flags;
  std::map<std::string, CLI::Option*> options;

  void apply_flags(RunConfig& cfg) const {
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) cfg.set(key, flags.at(key));
    }
  }

  RunConfig resolve(bool from_model) const {
    RunConfig probe;
    if (!config_file.empty()) {
      std::ifstream in = open_input(config_file);
      apply_config(probe, in, config_file);
    }
    apply_flags(probe);
    RunConfig cfg;
    const fs::path stored = fs::path(probe.model_dir) / "config.txt";
    if (from_model && !probe.model_dir.empty() && fs::exists(stored)) {
      std::ifstream in = open_input(stored);
      apply_config(cfg, in, stored.string());
    }
    if (!config_file.empty()) {
      std::ifstream in = open_input(config_file);
      apply_config(cfg, in, config_file);
    }
    apply_flags(cfg);
    cfg.validate();
    log("resolved config (seed " + std::to_string(cfg.seed) + "):\n" + cfg.to_text());
    return cfg;
  }
};

fs::path entity_model_dir(const RunConfig& cfg, const std::string& entity) {
  const fs::path root(cfg.model_dir);
  if (fs::exists(root / "model.bin")) return root;
  return root / entity;
}

const SeriesFrame& find_entity(const std::vector<SeriesFrame>& frames, const std::string& entity) {
  if (entity.empty()) {
    if (frames.size() != 1) throw ValidationError("dataset has several entities; pass --entity");
    return frames.front();
  }
  for (const SeriesFrame& f : frames)
    if (f.entity_id == entity) return f;
  throw ValidationError("no entity named '" + entity + "'");
}

Tensor destandardize_window(Tensor w, const StandardizeStats& stats) {
  for (std::size_t i = 0; i < w.dim(0); ++i)
    for (std::size_t t = 0; t < w.dim(1); ++t) w.at(i, t) = w.at(i, t) * stats.std_dev[i] + stats.mean[i];
  return w;
}

std::string feature_header(const SeriesFrame& frame, std::size_t m) {
  std::string out;
  for (std::size_t i = 0; i < m; ++i) {
    out += ',';
    out += i < frame.feature_names.size() ? frame.feature_names[i] : "f" + std::to_string(i);
  }
  return out;
}

// ---- train ----------------------------------------------------------------

int run_train(const RunConfig& cfg, bool resume) {
  require_path(cfg.train_data, "train_data");
  require_path(cfg.model_dir, "model_dir");
  const auto frames = load_dataset(cfg.train_data);
  fs::create_directories(cfg.model_dir);
  {
    std::ofstream conf = open_output(fs::path(cfg.model_dir) / "config.txt");
    conf << cfg.to_text();
  }
  parallel_for(frames.size(), cfg.workers, [&](std::size_t e) {
    const SeriesFrame& frame = frames[e];
    const fs::path dir = fs::path(cfg.model_dir) / frame.entity_id;
    fs::create_directories(dir);
    std::optional<TrainerState> state;
    if (resume && fs::exists(dir / "ckpt.bin")) {
      std::ifstream in = open_input(dir / "ckpt.bin");
      state = read_trainer_state(in);
      log(frame.entity_id + ": resuming at iteration " + std::to_string(state->iteration));
    }
    const auto t0 = std::chrono::steady_clock::now();
    const TrainOutcome res = train_entity(frame, cfg, state ? &*state : nullptr,
                                          [&](const TrainerState& s) {
                                            std::ofstream out = open_output(dir / "ckpt.bin");
                                            if (cfg.timing) {
                                              write_trainer_state(out, s);
                                              return;
                                            }
                                            TrainerState copy = s;
                                            for (LossRecord& r : copy.history) r.seconds = 0.0;
                                            write_trainer_state(out, copy);
                                          });
    const TrainingRun& run = res.run;
    save_model(dir, res.model, cfg);
    {
      std::ofstream loss = open_output(dir / "loss.csv");
      write_loss_csv(loss, run.history, cfg.timing);
      std::ofstream lat = open_output(dir / "latents.bin");
      write_latents(lat, run.latents);
    }
    std::ostringstream msg;
    msg << frame.entity_id << ": trained " << run.latents.size() << " windows, final loss "
        << (run.history.empty() ? 0.0 : run.history.back().loss);
    if (cfg.timing) {
      msg << ", " << seconds_since(t0) << " s (inference " << run.times.inference_seconds
          << " s, learning " << run.times.learning_seconds << " s)";
    }
    log(msg.str());
  });
  return 0;
}

// ---- detect ---------------------------------------------------------------

int run_detect(const RunConfig& cfg) {
  require_path(cfg.test_data, "test_data");
  require_path(cfg.model_dir, "model_dir");
  require_path(cfg.output, "output");
  const auto frames = load_dataset(cfg.test_data);
  fs::create_directories(cfg.output);
  const std::size_t inner = frames.size() == 1 ? cfg.workers : 1;
  parallel_for(frames.size(), cfg.workers, [&](std::size_t e) {
    const SeriesFrame& frame = frames[e];
    const auto t0 = std::chrono::steady_clock::now();
    const EntityModel model = load_model(entity_model_dir(cfg, frame.entity_id));
    const SeriesFrame test = prepare_test(frame, model.stats, cfg);
    const DetectOutcome res = detect_prepared(test, model, cfg, inner);
    std::ofstream out = open_output(fs::path(cfg.output) / (frame.entity_id + ".scores.csv"));
    write_scores_csv(out, res.raw, res.normalized, frame.feature_names, cfg.per_feature_scores);
    std::ostringstream msg;
    msg << frame.entity_id << ": scored " << test.length() << " timestamps";
    if (cfg.timing) msg << " in " << seconds_since(t0) << " s";
    log(msg.str());
  });
  return 0;
}

// ---- evaluate -------------------------------------------------------------

std::string strip_suffix(const std::string& name, const std::string& suffix) {
  return name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0
             ? name.substr(0, name.size() - suffix.size())
             : name;
}

std::vector<bool> read_label_file(const fs::path& path) {
  std::ifstream in = open_input(path);
  return read_labels(in, path.string());
}

// Labels may be downsampled to match pooled scores.
std::vector<bool> pool_labels(const std::vector<bool>& labels, std::size_t factor) {
  if (factor == 1) return labels;
  std::vector<bool> out((labels.size() + factor - 1) / factor, false);
  for (std::size_t t = 0; t < labels.size(); ++t)
    if (labels[t]) out[t / factor] = true;
  return out;
}

int run_evaluate(const RunConfig& cfg, const std::string& scores_arg, const std::string& labels_arg,
                 bool adjusted, bool single, const std::string& column_name,
                 const std::string& report_path) {
  const fs::path scores = scores_arg.empty() ? fs::path(cfg.output) : fs::path(scores_arg);
  const fs::path labels = labels_arg.empty() ? fs::path(cfg.test_data) : fs::path(labels_arg);
  if (scores.empty()) throw ValidationError("missing --scores");
  if (labels.empty()) throw ValidationError("missing --labels");
  const ScoreColumn column = column_name == "raw"          ? ScoreColumn::kRaw
                             : column_name == "normalized" ? ScoreColumn::kNormalized
                                                           : ScoreColumn::kAuto;
  std::vector<EntityScores> entities;
  auto add = [&](const fs::path& s, const fs::path& l, const std::string& entity) {
    std::ifstream in = open_input(s);
    const ScoreTable table = read_scores_csv(in, s.string());
    EntityScores e{entity, table.raw, table.normalized, pool_labels(read_label_file(l), cfg.downsample)};
    if (e.labels.size() != e.raw.size()) {
      throw ParseError(l.string() + ": " + std::to_string(e.labels.size()) + " labels for " +
                       std::to_string(e.raw.size()) + " scores");
    }
    entities.push_back(std::move(e));
  };
  if (fs::is_directory(scores)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(scores)) {
      const std::string name = entry.path().filename().string();
      if (strip_suffix(name, ".scores.csv") != name) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ParseError("no .scores.csv files in " + scores.string());
    for (const fs::path& f : files) {
      const std::string entity = strip_suffix(f.filename().string(), ".scores.csv");
      const fs::path l = fs::is_directory(labels) ? labels / (entity + ".labels.csv") : labels;
      add(f, l, entity);
    }
  } else {
    fs::path l = labels;
    const std::string entity = strip_suffix(scores.filename().string(), ".scores.csv");
    if (fs::is_directory(labels)) l = labels / (entity + ".labels.csv");
    add(scores, l, entity);
  }
  const EvaluationReport rep = evaluate_entities(entities, adjusted, single, column);
  if (report_path.empty()) {
    write_report(std::cout, rep);
  } else {
    std::ofstream out = open_output(report_path);
    write_report(out, rep);
  }
  log("best F1 " + format_double(rep.overall.f1) + " over " + std::to_string(entities.size()) +
      " entities");
  return 0;
}

// ---- occlude --------------------------------------------------------------

int run_occlude(const RunConfig& cfg, const std::string& data) {
  const std::string input = data.empty() ? cfg.train_data : data;
  require_path(input, "train_data");
  require_path(cfg.output, "output");
  const auto frames = load_dataset(input);
  for (std::size_t e = 0; e < frames.size(); ++e) {
    OcclusionSpec spec = cfg.occlusion_spec();
    spec.seed = derive_seed(cfg.seed, Stream::kOcclusion, {2, e});
    const SeriesFrame out = occlude(frames[e], spec);
    write_frame(cfg.output, out);
    log(frames[e].entity_id + ": " + std::to_string(out.mask.size() - out.mask.count_observed()) +
        " of " + std::to_string(out.mask.size()) + " entries hidden");
  }
  return 0;
}

// ---- forecast / interpolate -----------------------------------------------

int run_forecast(const RunConfig& cfg, const std::string& data, const std::string& entity,
                 std::size_t window_index, std::size_t observed_len) {
  const std::string input = data.empty() ? cfg.test_data : data;
  require_path(input, "test_data");
  require_path(cfg.model_dir, "model_dir");
  require_path(cfg.output, "output");
  const auto frames = load_dataset(input);
  const SeriesFrame& frame = find_entity(frames, entity);
  const EntityModel model = load_model(entity_model_dir(cfg, frame.entity_id));
  const HierarchySpec spec = cfg.hierarchy_spec();
  const SeriesFrame test = prepare_test(frame, model.stats, cfg);
  const auto windows = make_windows(test, cfg.windowing());
  if (window_index >= windows.size()) {
    throw ValidationError("window index " + std::to_string(window_index) + " out of range (" +
                          std::to_string(windows.size()) + " windows)");
  }
  const SeriesWindow& w = windows[window_index];
  const std::size_t obs = observed_len == 0 ? spec.window_len() / 2 : observed_len;
  const Tensor pred = forecast(w.values, obs, model.params, spec, cfg.eval_langevin(), cfg.seed, window_index);
  const Tensor out_vals = destandardize_window(pred, model.stats);

  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.dim(0); ++i)
    for (std::size_t c = std::max(obs, w.pad); c < pred.dim(1); ++c)
      if (w.mask(i, c)) {
        const double d = pred.at(i, c) - w.values.at(i, c);
        sq += d * d;
        ++n;
      }
  std::ofstream out = open_output(cfg.output);
  out << "timestamp,observed" << feature_header(frame, pred.dim(0)) << '\n';
  for (std::size_t c = w.pad; c < pred.dim(1); ++c) {
    out << w.start + c - w.pad << ',' << (c < obs ? 1 : 0);
    for (std::size_t i = 0; i < pred.dim(0); ++i) out << ',' << format_double(out_vals.at(i, c));
    out << '\n';
  }
  log(frame.entity_id + ": forecast window " + std::to_string(window_index) +
      ", standardized MSE over the hidden part " + format_double(n ? sq / static_cast<double>(n) : 0.0));
  return 0;
}

int run_interpolate(const RunConfig& cfg, const std::string& entity, std::size_t a, std::size_t b,
                    const std::vector<double>& alphas) {
  require_path(cfg.model_dir, "model_dir");
  require_path(cfg.output, "output");
  fs::path dir(cfg.model_dir);
  if (!fs::exists(dir / "model.bin")) {
    if (entity.empty()) throw ValidationError("model directory holds several entities; pass --entity");
    dir /= entity;
  }
  const EntityModel model = load_model(dir);
  std::ifstream in = open_input(dir / "latents.bin");
  const auto latents = read_latents(in);
  if (a >= latents.size() || b >= latents.size()) {
    throw ValidationError("window index out of range (" + std::to_string(latents.size()) +
                          " training windows)");
  }
  const auto windows = interpolate_latents(latents[a], latents[b], alphas, model.params, cfg.hierarchy_spec());
  std::ofstream out = open_output(cfg.output);
  out << "alpha,t";
  for (std::size_t i = 0; i < model.params.arch.n_features; ++i) out << ",f" << i;
  out << '\n';
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    const Tensor w = destandardize_window(windows[k], model.stats);
    for (std::size_t t = 0; t < w.dim(1); ++t) {
      out << format_double(alphas[k]) << ',' << t;
      for (std::size_t i = 0; i < w.dim(0); ++i) out << ',' << format_double(w.at(i, t));
      out << '\n';
    }
  }
  log("interpolated " + std::to_string(alphas.size()) + " windows between " + std::to_string(a) +
      " and " + std::to_string(b));
  return 0;
}

// ---- synth / baseline -----------------------------------------------------

int run_synth(const RunConfig& cfg, SynthSpec spec) {
  require_path(cfg.output, "output");
  spec.seed = cfg.seed;
  const SynthData data = synth_generate(spec);
  const fs::path root(cfg.output);
  write_frame(root / "train", data.train);
  write_frame(root / "test", data.test);
  std::ofstream out = open_output(root / "anomalies.csv");
  out << "kind,feature,begin,end,offset\n";
  for (const InjectedAnomaly& an : data.anomalies) {
    out << (an.kind == AnomalyKind::kSpike ? "spike" : "level_shift") << ',' << an.feature << ','
        << an.begin << ',' << an.end << ',' << format_double(an.offset) << '\n';
  }
  log("wrote " + std::to_string(spec.n_features) + "-feature benchmark with " +
      std::to_string(data.anomalies.size()) + " anomalies to " + root.string());
  return 0;
}

int run_baseline(const RunConfig& cfg, const std::string& method) {
  require_path(cfg.train_data, "train_data");
  require_path(cfg.test_data, "test_data");
  require_path(cfg.output, "output");
  const auto train_frames = load_dataset(cfg.train_data);
  const auto test_frames = load_dataset(cfg.test_data);
  fs::create_directories(cfg.output);
  parallel_for(test_frames.size(), cfg.workers, [&](std::size_t e) {
    const SeriesFrame& test_raw = test_frames[e];
    const SeriesFrame& train_raw =
        train_frames.size() == 1 ? train_frames.front() : find_entity(train_frames, test_raw.entity_id);
    const SeriesFrame down = downsample(train_raw, cfg.downsample);
    const StandardizeStats stats = fit_standardize(down);
    SeriesFrame train = apply_standardize(down, stats);
    if (cfg.occlude_train && cfg.occlusion_p > 0.0) train = occlude(train, cfg.occlusion_spec());
    const SeriesFrame test = prepare_test(test_raw, stats, cfg);
    const WindowingSpec windowing = cfg.windowing();
    ScoreSeries raw;
    if (method == "mean-deviation") {
      raw = baseline_mean_deviation(train, test);
    } else {
      raw = baseline_knn(make_windows(train, windowing), make_windows(test, windowing), cfg.knn_k,
                         test.length());
    }
    const ScoreSeries norm = normalize_scores(raw, windowing);
    std::ofstream out = open_output(fs::path(cfg.output) / (test_raw.entity_id + ".scores.csv"));
    write_scores_csv(out, raw, norm, test_raw.feature_names, false);
    log(test_raw.entity_id + ": " + method + " baseline scored " + std::to_string(test.length()) +
        " timestamps");
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dghl: hierarchical latent generative model for time-series anomaly detection"};
  app.require_subcommand(1);
  app.fallthrough();

  ConfigSources sources;
  app.add_option("--config", sources.config_file, "key = value configuration file");
  for (const std::string& key : RunConfig::keys()) {
    sources.options[key] = app.add_option("--" + dashed(key), sources.flags[key], RunConfig::help(key));
  }

  auto* train = app.add_subcommand("train", "train one model per entity of --train-data");
  bool resume = false;
  train->add_flag("--resume", resume, "continue from <model-dir>/<entity>/ckpt.bin when present");

  auto* detect = app.add_subcommand("detect", "score --test-data with trained models");

  auto* evaluate = app.add_subcommand("evaluate", "best-F1 report from score files and labels");
  std::string scores_arg, labels_arg, report_path, column = "auto";
  bool adjusted = false, single = false;
  evaluate->add_option("--scores", scores_arg, "score CSV or directory (default: --output)");
  evaluate->add_option("--labels", labels_arg, "label file or directory (default: --test-data)");
  evaluate->add_flag("--adjusted", adjusted, "apply point adjustment");
  evaluate->add_flag("--single-threshold-across-entities", single, "one threshold for all entities");
  evaluate->add_option("--score-column", column, "auto | raw | normalized")
      ->check(CLI::IsMember({"auto", "raw", "normalized"}));
  evaluate->add_option("--report", report_path, "write the report here instead of stdout");

  auto* occl = app.add_subcommand("occlude", "hide (feature, segment) cells of a dataset");
  std::string data_arg;
  occl->add_option("--data", data_arg, "dataset to occlude (default: --train-data)");

  auto* fc = app.add_subcommand("forecast", "infer from the first part of a window, generate the rest");
  std::string entity;
  std::size_t window_index = 0, observed_len = 0;
  fc->add_option("--data", data_arg, "dataset (default: --test-data)");
  fc->add_option("--entity", entity, "entity id when the dataset has several");
  fc->add_option("--window-index", window_index, "window to forecast");
  fc->add_option("--observed-len", observed_len, "observed prefix length (default: half a window)");

  auto* interp = app.add_subcommand("interpolate", "generate windows between two training latents");
  std::size_t win_a = 0, win_b = 1;
  std::vector<double> alphas = {0.0, 0.25, 0.5, 0.75, 1.0};
  interp->add_option("--entity", entity, "entity id");
  interp->add_option("--window-a", win_a, "first training window");
  interp->add_option("--window-b", win_b, "second training window");
  interp->add_option("--alphas", alphas, "mixing weights")->delimiter(',');

  auto* synth = app.add_subcommand("synth", "write the synthetic multi-sine benchmark to --output");
  SynthSpec synth_spec;
  synth->add_option("--features", synth_spec.n_features, "number of features");
  synth->add_option("--train-len", synth_spec.train_len, "training length");
  synth->add_option("--test-len", synth_spec.test_len, "test length");
  synth->add_option("--spikes", synth_spec.n_spikes, "injected spikes");
  synth->add_option("--level-shifts", synth_spec.n_level_shifts, "injected level shifts");
  synth->add_option("--shift-magnitude", synth_spec.shift_magnitude, "level shift size in clean std units");

  auto* base = app.add_subcommand("baseline", "score --test-data with a reference detector");
  std::string method;
  base->add_option("method", method, "mean-deviation | knn")
      ->required()
      ->check(CLI::IsMember({"mean-deviation", "knn"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (*train) return run_train(sources.resolve(false), resume);
    if (*detect) return run_detect(sources.resolve(true));
    if (*evaluate) {
      return run_evaluate(sources.resolve(false), scores_arg, labels_arg, adjusted, single, column,
                          report_path);
    }
    if (*occl) return run_occlude(sources.resolve(false), data_arg);
    if (*fc) return run_forecast(sources.resolve(true), data_arg, entity, window_index, observed_len);
    if (*interp) return run_interpolate(sources.resolve(true), entity, win_a, win_b, alphas);
    if (*synth) return run_synth(sources.resolve(false), synth_spec);
    if (*base) return run_baseline(sources.resolve(false), method);
  } catch (const Error& e) {
    log(std::string("error: ") + e.what());
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return static_cast<int>(ExitCode::kData);
  }
  return static_cast<int>(ExitCode::kUsage);
}
