#pragma once

// Per-entity pipelines shared by the command-line tool, the acceptance suite
// and the Python bindings. Order of preprocessing for both splits:
// downsample, standardize with the training statistics, then occlude.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dghl/config.hpp"
#include "dghl/dataio.hpp"
#include "dghl/detector.hpp"
#include "dghl/metrics.hpp"
#include "dghl/trainer.hpp"

namespace dghl {

struct EntityModel {
  GeneratorParams params;
  StandardizeStats stats;
};

struct TrainOutcome {
  EntityModel model;
  TrainingRun run;
  SeriesFrame prepared;  // the standardized (and occluded) training split
};

/// Downsample, fit and apply standardization, apply training occlusion when
/// enabled, then run alternating back-propagation. `on_checkpoint` fires every
/// `checkpoint_every` iterations.
TrainOutcome train_entity(const SeriesFrame& train, const RunConfig& cfg,
                          const TrainerState* resume = nullptr,
                          std::function<void(const TrainerState&)> on_checkpoint = {});

/// Downsample and standardize with the model's statistics; applies test
/// occlusion when enabled (on a stream separate from training occlusion).
SeriesFrame prepare_test(const SeriesFrame& test, const StandardizeStats& stats,
                         const RunConfig& cfg);

struct DetectOutcome {
  ScoreSeries raw;
  ScoreSeries normalized;
  StreamResult stream;
};

/// `test` must already be prepared. `workers` parallelises over windows.
DetectOutcome detect_prepared(const SeriesFrame& test, const EntityModel& model,
                              const RunConfig& cfg, std::size_t workers);

/// Model directory: model.bin, stats.csv and the resolved config.txt.
void save_model(const std::filesystem::path& dir, const EntityModel& model, const RunConfig& cfg);
EntityModel load_model(const std::filesystem::path& dir);

/// iteration,loss,reconstruction,lr,seconds (seconds written as 0 unless timing).
void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& history, bool timing);

/// Which score column feeds the threshold sweep.
enum class ScoreColumn { kAuto, kRaw, kNormalized };

struct EntityScores {
  std::string entity;
  std::vector<double> raw;
  std::vector<double> normalized;
  std::vector<bool> labels;
};

struct EvaluationReport {
  bool adjusted = false;
  bool single_threshold = false;
  std::string column;  // "raw" or "normalized"
  EvalReport overall;  // pooled counts (per-entity thresholds) or shared threshold
  std::vector<std::pair<std::string, EvalReport>> per_entity;
};

/// auto: raw for a single entity, normalized when one threshold spans several.
EvaluationReport evaluate_entities(const std::vector<EntityScores>& entities, bool adjusted,
                                   bool single_threshold, ScoreColumn column);

/// Structured `key: value` text, one block per entity.
void write_report(std::ostream& out, const EvaluationReport& report);

}  // namespace dghl
