// hrsim: intelligibility prediction from hidden-representation similarity.
//
//   hrsim featurize --manifest trials.json --cache-dir cache
//   hrsim forward   --cache-dir cache [--levels pre,enc,dec]
//   hrsim sim       --manifest trials.json --cache-dir cache --level dec --out-dir out
//   hrsim fit       --manifest trials.json --out-dir out [--fit-split dev|train_all]
//   hrsim eval      --manifest trials.json --out-dir out [--group-by trial,listener,system]
//   hrsim report    (all of the above in sequence)
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hrsim/pipeline.hpp"

namespace {

using namespace hrsim;
namespace fs = std::filesystem;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct Options {
  std::string config_file;
  std::string level;
  int dtw_radius = -1;
  std::string fit_split;
  std::string levels;
  std::string group_by;
  std::string scores;
  std::string params;
  bool wcs_percent = false;
  bool lenient = false;
  int jobs = 0;
  std::string manifest, cache_dir, out_dir;
};

PipelineConfig resolve(const Options& o) {
  PipelineConfig cfg;
  if (!o.config_file.empty()) apply_config_file(o.config_file, cfg);
  if (!o.level.empty()) cfg.level = parse_level(o.level);
  if (o.dtw_radius >= 0) cfg.dtw_radius = o.dtw_radius;
  if (o.fit_split == "dev") cfg.fit_split = FitSplit::Dev;
  else if (o.fit_split == "train_all") cfg.fit_split = FitSplit::TrainAll;
  else if (!o.fit_split.empty()) throw UsageError("--fit-split must be dev or train_all");
  if (o.wcs_percent) cfg.wcs_percent = true;
  if (o.lenient) cfg.lenient = true;
  if (o.jobs > 0) cfg.jobs = o.jobs;
  if (!o.levels.empty()) {
    cfg.forward_levels.clear();
    for (const auto& name : split_list(o.levels)) {
      const Level l = parse_level(name);
      if (l == Level::Input) throw UsageError("--levels takes pre, enc or dec");
      cfg.forward_levels.push_back(l);
    }
  }
  if (!o.group_by.empty()) {
    cfg.groupings.clear();
    for (const auto& name : split_list(o.group_by)) cfg.groupings.push_back(parse_grouping(name));
  }
  cfg.manifest = o.manifest;
  if (!o.cache_dir.empty()) cfg.cache_dir = o.cache_dir;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  return cfg;
}

Manifest manifest_for(const PipelineConfig& cfg) {
  if (cfg.manifest.empty()) throw UsageError("--manifest is required for this command");
  Manifest m = load_manifest(cfg.manifest, cfg.manifest_options());
  for (const auto& issue : m.issues) std::cerr << "warning: " << issue << '\n';
  return m;
}

int report_stage(const char* name, const StageResult& r, bool lenient) {
  std::cerr << name << ": " << r.written << " written, " << r.skipped << " up to date, " << r.failed_units
            << "/" << r.total_units << " failed\n";
  for (const auto& e : r.errors) std::cerr << "  " << e << '\n';
  return r.exit_code(lenient);
}

fs::path scores_path(const Options& o, const PipelineConfig& cfg) {
  return o.scores.empty() ? cfg.out_dir / "scores.csv" : fs::path(o.scores);
}

fs::path params_path(const Options& o, const PipelineConfig& cfg) {
  return o.params.empty() ? cfg.out_dir / "params.json" : fs::path(o.params);
}

int run_featurize(const Options& o) {
  const auto cfg = resolve(o);
  return report_stage("featurize", cmd_featurize(manifest_for(cfg), cfg), cfg.lenient);
}

int run_forward(const Options& o) {
  const auto cfg = resolve(o);
  return report_stage("forward", cmd_forward(cfg), cfg.lenient);
}

int run_sim(const Options& o) {
  const auto cfg = resolve(o);
  return report_stage("sim", cmd_sim(manifest_for(cfg), cfg, scores_path(o, cfg)), cfg.lenient);
}

int run_fit(const Options& o) {
  const auto cfg = resolve(o);
  const FitResult fit = cmd_fit(read_scores_csv(scores_path(o, cfg)), manifest_for(cfg), cfg.fit_split);
  write_params_json(params_path(o, cfg), fit);
  std::cerr << "fit: a=" << fit.params.a << " b=" << fit.params.b << " rmse=" << fit.fit_rmse
            << " n=" << fit.n_dev << '\n';
  return 0;
}

void print_summary(const EvalOutputs& out) {
  std::cout << "grouping   n      RMSE     NCC      KT\n";
  for (const auto& r : out.reports) {
    auto show = [](const std::optional<double>& v) {
      std::ostringstream s;
      s.setf(std::ios::fixed);
      s.precision(3);
      if (v) s << *v; else s << "n/a  ";
      return s.str();
    };
    std::cout << std::left << std::setw(10) << to_string(r.grouping) << ' ' << std::setw(6) << r.n_points
              << ' ' << show(r.rmse) << "    " << show(r.ncc) << "    " << show(r.kt) << '\n';
  }
}

int run_eval(const Options& o) {
  const auto cfg = resolve(o);
  const auto out = cmd_eval(read_scores_csv(scores_path(o, cfg)), read_params_json(params_path(o, cfg)),
                            manifest_for(cfg), cfg);
  write_reports(cfg.out_dir, out);
  print_summary(out);
  return 0;
}

int run_report(const Options& o) {
  const auto cfg = resolve(o);
  const Manifest m = manifest_for(cfg);
  if (int rc = report_stage("featurize", cmd_featurize(m, cfg), cfg.lenient)) return rc;
  PipelineConfig fwd = cfg;
  if (o.levels.empty()) fwd.forward_levels = {cfg.level};
  if (cfg.level != Level::Input)
    if (int rc = report_stage("forward", cmd_forward(fwd), cfg.lenient)) return rc;
  if (int rc = report_stage("sim", cmd_sim(m, cfg, scores_path(o, cfg)), cfg.lenient)) return rc;
  const auto scores = read_scores_csv(scores_path(o, cfg));
  const FitResult fit = cmd_fit(scores, m, cfg.fit_split);
  write_params_json(params_path(o, cfg), fit);
  const auto out = cmd_eval(scores, fit.params, m, cfg);
  write_reports(cfg.out_dir, out);
  print_summary(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech intelligibility prediction from recogniser hidden-representation similarity"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--manifest", o.manifest, "Trial manifest (JSON)");
    sub->add_option("--cache-dir", o.cache_dir, "Representation cache directory");
    sub->add_option("--out-dir", o.out_dir, "Directory for scores, params and reports");
    sub->add_option("--config", o.config_file, "JSON config file");
    sub->add_option("--level", o.level, "Representation level: input, pre, enc or dec");
    sub->add_option("--dtw-radius", o.dtw_radius, "Fast-DTW corridor radius (level dec)");
    sub->add_option("--fit-split", o.fit_split, "Split used for fitting: dev or train_all");
    sub->add_flag("--wcs-percent", o.wcs_percent, "Manifest correctness is given on 0-100");
    sub->add_flag("--lenient", o.lenient, "Report missing files instead of failing");
    sub->add_option("--jobs", o.jobs, "Worker threads");
  };

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Command commands[] = {
      {"featurize", "Compute log-mel features into the cache", run_featurize},
      {"forward", "Run the toy recogniser over cached features", run_forward},
      {"sim", "Score trials by binaural representation similarity", run_sim},
      {"fit", "Fit the logistic mapping on the dev split", run_fit},
      {"eval", "Evaluate mapped predictions on the eval split", run_eval},
      {"report", "Run featurize, forward, sim, fit and eval", run_report},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    if (std::string(c.name) == "forward" || std::string(c.name) == "report")
      sub->add_option("--levels", o.levels, "Comma-separated levels to write (pre,enc,dec)");
    if (std::string(c.name) == "fit" || std::string(c.name) == "eval") {
      sub->add_option("--scores", o.scores, "Scores CSV (default <out-dir>/scores.csv)");
      sub->add_option("--params", o.params, "Params JSON (default <out-dir>/params.json)");
    }
    if (std::string(c.name) == "sim") sub->add_option("--scores", o.scores, "Output scores CSV");
    if (std::string(c.name) == "eval" || std::string(c.name) == "report")
      sub->add_option("--group-by", o.group_by, "Comma-separated groupings (trial,listener,system)");
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    for (const auto& [sub, cmd] : subs)
      if (sub->parsed()) return cmd->run(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 3;
}
