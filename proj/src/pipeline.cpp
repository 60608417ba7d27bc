#include "dghl/pipeline.hpp"

#include <fstream>
#include <ostream>

#include "dghl/error.hpp"
#include "dghl/rng.hpp"

namespace dghl {

namespace fs = std::filesystem;

namespace {

SeriesFrame occlude_if(const SeriesFrame& frame, bool enabled, OcclusionSpec spec) {
  if (!enabled || spec.probability <= 0.0) return frame;
  return occlude(frame, spec);
}

std::ifstream open_or_throw(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

void fill_ratios(EvalReport& r) {
  const double tp = static_cast<double>(r.true_positives);
  r.precision = r.true_positives + r.false_positives > 0
                    ? tp / static_cast<double>(r.true_positives + r.false_positives)
                    : 0.0;
  r.recall = r.true_positives + r.false_negatives > 0
                 ? tp / static_cast<double>(r.true_positives + r.false_negatives)
                 : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                                      : 0.0;
}

void write_block(std::ostream& out, const EvalReport& r) {
  out << "  precision: " << format_double(r.precision) << '\n'
      << "  recall: " << format_double(r.recall) << '\n'
      << "  f1: " << format_double(r.f1) << '\n'
      << "  threshold: " << format_double(r.threshold) << '\n'
      << "  true_positives: " << r.true_positives << '\n'
      << "  false_positives: " << r.false_positives << '\n'
      << "  false_negatives: " << r.false_negatives << '\n';
}

}  // namespace

TrainOutcome train_entity(const SeriesFrame& train, const RunConfig& cfg,
                          const TrainerState* resume,
                          std::function<void(const TrainerState&)> on_checkpoint) {
  cfg.validate();
  const SeriesFrame down = downsample(train, cfg.downsample);
  TrainOutcome out;
  out.model.stats = fit_standardize(down);
  out.prepared = occlude_if(apply_standardize(down, out.model.stats), cfg.occlude_train,
                            cfg.occlusion_spec());
  const auto windows = make_windows(out.prepared, cfg.windowing());
  TrainConfig tc = cfg.train_config();
  tc.on_checkpoint = std::move(on_checkpoint);
  out.run = abp_train(windows, cfg.hierarchy_spec(), cfg.generator_arch(down.n_features()), tc,
                      resume);
  out.model.params = out.run.params;
  return out;
}

SeriesFrame prepare_test(const SeriesFrame& test, const StandardizeStats& stats,
                         const RunConfig& cfg) {
  OcclusionSpec spec = cfg.occlusion_spec();
  spec.seed = derive_seed(cfg.seed, Stream::kOcclusion, {1});
  return occlude_if(apply_standardize(downsample(test, cfg.downsample), stats), cfg.occlude_test,
                    spec);
}

DetectOutcome detect_prepared(const SeriesFrame& test, const EntityModel& model,
                              const RunConfig& cfg, std::size_t workers) {
  cfg.validate();
  DetectConfig dc = cfg.detect_config();
  dc.workers = workers;
  DetectOutcome out;
  out.stream = reconstruct_stream(test, model.params, cfg.hierarchy_spec(), dc);
  out.raw = out.stream.scores;
  out.normalized = normalize_scores(out.raw, dc.windowing);
  return out;
}

void save_model(const fs::path& dir, const EntityModel& model, const RunConfig& cfg) {
  fs::create_directories(dir);
  std::ofstream bin(dir / "model.bin", std::ios::binary);
  write_generator(bin, model.params);
  std::ofstream stats(dir / "stats.csv");
  write_stats_csv(stats, model.stats);
  std::ofstream conf(dir / "config.txt");
  conf << cfg.to_text();
  if (!bin || !stats || !conf) throw Error("failed writing model files to " + dir.string());
}

EntityModel load_model(const fs::path& dir) {
  EntityModel model;
  std::ifstream bin = open_or_throw(dir / "model.bin");
  model.params = read_generator(bin);
  std::ifstream stats = open_or_throw(dir / "stats.csv");
  model.stats = read_stats_csv(stats, (dir / "stats.csv").string());
  if (model.stats.mean.size() != model.params.arch.n_features) {
    throw ParseError(dir.string() + ": stats cover " + std::to_string(model.stats.mean.size()) +
                     " features, model has " + std::to_string(model.params.arch.n_features));
  }
  return model;
}

void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& history, bool timing) {
  out << "iteration,loss,reconstruction,lr,seconds\n";
  for (const LossRecord& r : history) {
    out << r.iteration << ',' << format_double(r.loss) << ',' << format_double(r.reconstruction)
        << ',' << format_double(r.lr) << ',' << format_double(timing ? r.seconds : 0.0) << '\n';
  }
}

EvaluationReport evaluate_entities(const std::vector<EntityScores>& entities, bool adjusted,
                                   bool single_threshold, ScoreColumn column) {
  if (entities.empty()) throw ValidationError("evaluate: no entities");
  EvaluationReport rep;
  rep.adjusted = adjusted;
  rep.single_threshold = single_threshold;
  const bool normalized = column == ScoreColumn::kNormalized ||
                          (column == ScoreColumn::kAuto && single_threshold && entities.size() > 1);
  rep.column = normalized ? "normalized" : "raw";
  auto pick = [&](const EntityScores& e) -> const std::vector<double>& {
    return normalized ? e.normalized : e.raw;
  };

  if (single_threshold) {
    std::vector<LabelledScores> all;
    for (const EntityScores& e : entities) all.push_back({pick(e), &e.labels});
    rep.overall = best_f1(all, adjusted);
    for (const EntityScores& e : entities) {
      rep.per_entity.emplace_back(e.entity,
                                  evaluate_threshold(pick(e), e.labels, rep.overall.threshold, adjusted));
    }
    return rep;
  }
  rep.overall.adjusted = adjusted;
  for (const EntityScores& e : entities) {
    const EvalReport r = best_f1(pick(e), e.labels, adjusted);
    rep.per_entity.emplace_back(e.entity, r);
    rep.overall.true_positives += r.true_positives;
    rep.overall.false_positives += r.false_positives;
    rep.overall.false_negatives += r.false_negatives;
  }
  if (entities.size() == 1) {
    rep.overall = rep.per_entity.front().second;
  } else {
    fill_ratios(rep.overall);
    rep.overall.threshold = 0.0;  // thresholds differ per entity
  }
  return rep;
}

void write_report(std::ostream& out, const EvaluationReport& report) {
  out << "adjusted: " << (report.adjusted ? "true" : "false") << '\n'
      << "threshold_mode: " << (report.single_threshold ? "single" : "per-entity") << '\n'
      << "score_column: " << report.column << '\n'
      << "entities: " << report.per_entity.size() << '\n'
      << "overall:\n";
  write_block(out, report.overall);
  for (const auto& [name, r] : report.per_entity) {
    out << "entity " << name << ":\n";
    write_block(out, r);
  }
}

}  // namespace dghl
