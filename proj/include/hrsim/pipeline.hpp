#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hrsim/asr.hpp"
#include "hrsim/calib.hpp"
#include "hrsim/feats.hpp"
#include "hrsim/manifest.hpp"
#include "hrsim/repr.hpp"

namespace hrsim {

enum class FitSplit { Dev, TrainAll };

struct PipelineConfig {
  FeatConfig feat;
  ToyAsrConfig asr;
  Level level = Level::Enc;
  int dtw_radius = 10;
  FitSplit fit_split = FitSplit::Dev;
  bool wcs_percent = false;
  bool lenient = false;
  std::vector<Level> forward_levels{Level::Pre, Level::Enc, Level::Dec};
  std::vector<Grouping> groupings{Grouping::Trial, Grouping::Listener, Grouping::System};
  int jobs = 1;

  std::filesystem::path manifest;
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path out_dir = ".";

  ManifestOptions manifest_options() const { return {wcs_percent, lenient, true}; }
};

/// Overlays settings from a JSON config file: sections "feat" and "asr",
/// plus "level", "dtw_radius", "fit_split", "wcs_percent", "lenient".
void apply_config_file(const std::filesystem::path& path, PipelineConfig& cfg);
void apply_config_json(const std::string& json_text, PipelineConfig& cfg);

std::string feat_config_json(const FeatConfig& cfg);
std::string asr_config_json(const ToyAsrConfig& cfg);

/// 64-bit FNV-1a, used for cache keys.
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

enum class Side { Ref, Proc };

/// cache_dir/<level>/<signal id>.<side>.<channel>.hrep
std::filesystem::path cache_path(const std::filesystem::path& cache_dir, Level level,
                                 const std::string& signal_id, Side side, Channel channel);

struct StageResult {
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::size_t total_units = 0;
  std::size_t failed_units = 0;
  std::vector<std::string> errors;

  /// 0 unless a unit failed in strict mode, or every unit failed.
  int exit_code(bool lenient) const;
};

/// Log-mel features for every (signal, side, channel) named by the manifest.
/// Entries whose cache key (input bytes + feature config) is unchanged are skipped.
StageResult cmd_featurize(const Manifest& manifest, const PipelineConfig& cfg);

/// Toy recogniser forward pass over every input-level file in the cache,
/// writing the levels listed in cfg.forward_levels.
StageResult cmd_forward(const PipelineConfig& cfg);

struct ScoreRow {
  std::string signal_id, listener_id, system_id;
  Level level = Level::Enc;
  std::optional<double> raw_score;
  std::size_t zero_norm_frames = 0;
  std::string error;
};

/// One similarity row per trial at cfg.level, ordered by (signal id, listener id).
std::vector<ScoreRow> compute_scores(const Manifest& manifest, const PipelineConfig& cfg);

/// Writes scores.csv: a "# generated" timestamp line, then a header row.
StageResult cmd_sim(const Manifest& manifest, const PipelineConfig& cfg,
                    const std::filesystem::path& scores_csv);

void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path);

struct FitResult {
  LogisticParams params;
  double fit_rmse = 0.0;
  std::size_t n_dev = 0;
};

/// Fits the logistic map on the dev split (or train + dev). Other splits'
/// scores are never read.
FitResult cmd_fit(const std::vector<ScoreRow>& scores, const Manifest& manifest, FitSplit split);
void write_params_json(const std::filesystem::path& path, const FitResult& fit);
LogisticParams read_params_json(const std::filesystem::path& path);

struct EvalOutputs {
  std::vector<EvalReport> reports;  ///< one per requested grouping
  LogisticParams params;
};

/// Scores the eval split and writes report.json, report.csv and
/// report_<grouping>.csv for each non-trial grouping into out_dir.
EvalOutputs cmd_eval(const std::vector<ScoreRow>& scores, const LogisticParams& params,
                     const Manifest& manifest, const PipelineConfig& cfg);
void write_reports(const std::filesystem::path& out_dir, const EvalOutputs& outputs);

}  // namespace hrsim
