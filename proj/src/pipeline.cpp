#include "hrsim/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iterator>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "hrsim/sim.hpp"

namespace hrsim {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

template <typename T>
void take(const json& obj, const char* key, T& field) {
  if (const auto it = obj.find(key); it != obj.end()) {
    try {
      field = it->get<T>();
    } catch (const json::exception&) {
      throw UsageError(std::string("config key '") + key + "' has the wrong type");
    }
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const char* section) {
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw UsageError(std::string("unknown key '") + key + "' in config section " + section);
  }
}

}  // namespace

void apply_config_json(const std::string& json_text, PipelineConfig& cfg) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw UsageError("config must be a JSON object");
  reject_unknown(doc, {"feat", "asr", "level", "dtw_radius", "fit_split", "wcs_percent", "lenient", "jobs"},
                 "(top level)");

  if (const auto it = doc.find("feat"); it != doc.end()) {
    const json& f = *it;
    reject_unknown(f, {"n_mels", "window_ms", "hop_ms", "fft_size", "fmin_hz", "fmax_hz", "log_floor",
                       "normalize"},
                   "feat");
    take(f, "n_mels", cfg.feat.n_mels);
    take(f, "window_ms", cfg.feat.window_ms);
    take(f, "hop_ms", cfg.feat.hop_ms);
    take(f, "fft_size", cfg.feat.fft_size);
    take(f, "fmin_hz", cfg.feat.fmin_hz);
    take(f, "fmax_hz", cfg.feat.fmax_hz);
    take(f, "log_floor", cfg.feat.log_floor);
    take(f, "normalize", cfg.feat.normalize);
  }
  if (const auto it = doc.find("asr"); it != doc.end()) {
    const json& a = *it;
    reject_unknown(a, {"d_model", "n_heads", "n_enc_blocks", "n_dec_blocks", "d_ff", "prenet_channels",
                       "vocab_size", "max_decode_len", "seed_tag"},
                   "asr");
    take(a, "d_model", cfg.asr.d_model);
    take(a, "n_heads", cfg.asr.n_heads);
    take(a, "n_enc_blocks", cfg.asr.n_enc_blocks);
    take(a, "n_dec_blocks", cfg.asr.n_dec_blocks);
    take(a, "d_ff", cfg.asr.d_ff);
    take(a, "prenet_channels", cfg.asr.prenet_channels);
    take(a, "vocab_size", cfg.asr.vocab_size);
    take(a, "max_decode_len", cfg.asr.max_decode_len);
    take(a, "seed_tag", cfg.asr.seed_tag);
    cfg.asr.validate();
  }
  std::string text;
  if (doc.contains("level")) {
    take(doc, "level", text);
    cfg.level = parse_level(text);
  }
  if (doc.contains("fit_split")) {
    take(doc, "fit_split", text);
    if (text == "dev") cfg.fit_split = FitSplit::Dev;
    else if (text == "train_all") cfg.fit_split = FitSplit::TrainAll;
    else throw UsageError("fit_split must be 'dev' or 'train_all'");
  }
  take(doc, "dtw_radius", cfg.dtw_radius);
  take(doc, "wcs_percent", cfg.wcs_percent);
  take(doc, "lenient", cfg.lenient);
  take(doc, "jobs", cfg.jobs);
  if (cfg.dtw_radius < 0) throw UsageError("dtw_radius must be >= 0");
}

void apply_config_file(const fs::path& path, PipelineConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  apply_config_json(text.str(), cfg);
}

std::string feat_config_json(const FeatConfig& c) {
  ordered_json j{{"n_mels", c.n_mels},     {"window_ms", c.window_ms}, {"hop_ms", c.hop_ms},
                 {"fft_size", c.fft_size}, {"fmin_hz", c.fmin_hz},     {"fmax_hz", c.fmax_hz},
                 {"log_floor", c.log_floor}, {"normalize", c.normalize}};
  return j.dump();
}

std::string asr_config_json(const ToyAsrConfig& c) {
  ordered_json j{{"d_model", c.d_model},
                 {"n_heads", c.n_heads},
                 {"n_enc_blocks", c.n_enc_blocks},
                 {"n_dec_blocks", c.n_dec_blocks},
                 {"d_ff", c.d_ff},
                 {"prenet_channels", c.prenet_channels},
                 {"vocab_size", c.vocab_size},
                 {"max_decode_len", c.max_decode_len},
                 {"seed_tag", c.seed_tag}};
  return j.dump();
}

// ---------------------------------------------------------------------------
// Cache helpers

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::uint64_t fnv1a_text(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL) {
  return fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()), seed);
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text_or_empty(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return {};
  std::string s;
  std::getline(in, s);
  return s;
}

fs::path key_path(const fs::path& rep_path) {
  fs::path k = rep_path;
  k += ".key";
  return k;
}

bool cache_fresh(const fs::path& rep_path, const std::string& key) {
  return fs::exists(rep_path) && read_text_or_empty(key_path(rep_path)) == key;
}

void store(const RepSequence& rep, const fs::path& path, const std::string& key) {
  fs::create_directories(path.parent_path());
  write_reps(rep, path);
  std::ofstream out(key_path(path), std::ios::trunc);
  out << key << '\n';
  if (!out) throw DataError("cannot write cache key for '" + path.string() + "'");
}

std::string safe_name(const std::string& id) {
  std::string out = id;
  for (char& c : out)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  if (out.empty() || out[0] == '.') out.insert(out.begin(), '_');
  return out;
}

// Runs body(i) for i in [0, n) on up to `jobs` threads. Results must be
// written to per-index slots by the caller.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, 64));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  for (auto& t : pool) t.join();
}

struct UnitOutcome {
  std::size_t written = 0, skipped = 0;
  std::string error;
};

StageResult merge(const std::vector<UnitOutcome>& outcomes) {
  StageResult r;
  r.total_units = outcomes.size();
  for (const auto& o : outcomes) {
    r.written += o.written;
    r.skipped += o.skipped;
    if (!o.error.empty()) {
      ++r.failed_units;
      r.errors.push_back(o.error);
    }
  }
  return r;
}

struct SignalSources {
  std::string signal_id;
  fs::path paths[2][2];  // [side][channel]
};

// Unique signals of the manifest, sorted by id.
std::vector<SignalSources> unique_signals(const Manifest& manifest) {
  std::map<std::string, SignalSources> by_id;
  for (const auto& t : manifest.trials) {
    SignalSources s{t.signal_id, {{t.ref_left, t.ref_right}, {t.proc_left, t.proc_right}}};
    auto [it, inserted] = by_id.try_emplace(t.signal_id, s);
    if (!inserted) {
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          if (it->second.paths[a][b] != s.paths[a][b])
            throw DataError("signal '" + t.signal_id + "' appears with different source files");
    }
  }
  std::vector<SignalSources> out;
  for (auto& [id, s] : by_id) out.push_back(std::move(s));
  return out;
}

std::string_view side_name(Side s) { return s == Side::Ref ? "ref" : "proc"; }

}  // namespace

fs::path cache_path(const fs::path& cache_dir, Level level, const std::string& signal_id, Side side,
                    Channel channel) {
  return cache_dir / std::string(to_string(level)) /
         (safe_name(signal_id) + "." + std::string(side_name(side)) + "." +
          std::string(to_string(channel)) + ".hrep");
}

int StageResult::exit_code(bool lenient) const {
  if (failed_units == 0) return 0;
  if (!lenient || failed_units == total_units) return static_cast<int>(ErrorKind::Data);
  return 0;
}

// ---------------------------------------------------------------------------
// featurize

namespace {

UnitOutcome featurize_signal(const SignalSources& src, const PipelineConfig& cfg) {
  UnitOutcome out;
  try {
    const std::string feat_json = feat_config_json(cfg.feat);
    std::map<fs::path, std::vector<std::uint8_t>> raw;
    std::map<fs::path, StereoSignal> audio;
    int rate = 0;
    for (int side = 0; side < 2; ++side)
      for (int ch = 0; ch < 2; ++ch) {
        const fs::path& p = src.paths[side][ch];
        if (!fs::exists(p)) throw DataError("missing file " + p.string());
        if (!raw.contains(p)) raw[p] = read_bytes(p);
        if (p.extension() == ".hrep") continue;
        if (!audio.contains(p)) {
          try {
            audio[p] = decode_wav(raw[p]);
          } catch (const DataError& e) {
            throw DataError(p.string() + ": " + e.what());
          }
        }
        const int r = audio[p].sample_rate_hz;
        if (rate != 0 && r != rate)
          throw DataError("sample rates differ within the signal (" + std::to_string(rate) + " vs " +
                          std::to_string(r) + " Hz); resample beforehand");
        rate = r;
      }

    for (int side = 0; side < 2; ++side)
      for (int ch = 0; ch < 2; ++ch) {
        const fs::path& p = src.paths[side][ch];
        const auto channel = static_cast<Channel>(ch);
        const std::string tag = src.signal_id + "|" + std::to_string(side) + "|" + std::to_string(ch);
        if (p.extension() == ".hrep") {
          // Precomputed representation: stored under its own level.
          RepSequence rep = decode_reps(raw[p]);
          rep.signal_id = src.signal_id;
          rep.channel = channel;
          const std::string key = hex(fnv1a(raw[p], fnv1a_text(tag)));
          const fs::path dst = cache_path(cfg.cache_dir, rep.level, src.signal_id,
                                          static_cast<Side>(side), channel);
          if (cache_fresh(dst, key)) {
            ++out.skipped;
            continue;
          }
          store(rep, dst, key);
          ++out.written;
          continue;
        }
        const std::string key = hex(fnv1a(raw[p], fnv1a_text(tag, fnv1a_text(feat_json))));
        const fs::path dst = cache_path(cfg.cache_dir, Level::Input, src.signal_id,
                                        static_cast<Side>(side), channel);
        if (cache_fresh(dst, key)) {
          ++out.skipped;
          continue;
        }
        const StereoSignal& sig = audio.at(p);
        RepSequence rep = logmel(sig.channel(channel), cfg.feat, sig.sample_rate_hz);
        rep.signal_id = src.signal_id;
        rep.channel = channel;
        store(rep, dst, key);
        ++out.written;
      }
  } catch (const Error& e) {
    out.error = "signal '" + src.signal_id + "': " + e.what();
  }
  return out;
}

}  // namespace

StageResult cmd_featurize(const Manifest& manifest, const PipelineConfig& cfg) {
  const auto signals = unique_signals(manifest);
  std::vector<UnitOutcome> outcomes(signals.size());
  parallel_for(signals.size(), cfg.jobs,
               [&](std::size_t i) { outcomes[i] = featurize_signal(signals[i], cfg); });
  return merge(outcomes);
}

// ---------------------------------------------------------------------------
// forward

StageResult cmd_forward(const PipelineConfig& cfg) {
  const fs::path input_dir = cfg.cache_dir / std::string(to_string(Level::Input));
  std::vector<fs::path> inputs;
  if (fs::is_directory(input_dir))
    for (const auto& e : fs::directory_iterator(input_dir))
      if (e.path().extension() == ".hrep") inputs.push_back(e.path());
  std::sort(inputs.begin(), inputs.end());

  const ToyAsr shared(cfg.asr, cfg.feat.n_mels);
  const std::uint64_t cfg_hash = fnv1a_text(asr_config_json(cfg.asr));

  std::vector<UnitOutcome> outcomes(inputs.size());
  parallel_for(inputs.size(), cfg.jobs, [&](std::size_t i) {
    UnitOutcome& out = outcomes[i];
    try {
      const auto bytes = read_bytes(inputs[i]);
      const std::string key = hex(fnv1a(bytes, cfg_hash));
      std::vector<fs::path> targets;
      for (Level level : cfg.forward_levels)
        targets.push_back(cfg.cache_dir / std::string(to_string(level)) / inputs[i].filename());
      if (std::all_of(targets.begin(), targets.end(), [&](const fs::path& t) { return cache_fresh(t, key); })) {
        out.skipped += targets.size();
        return;
      }
      const RepSequence features = decode_reps(bytes);
      const LevelReps reps = features.dim() == shared.n_mels()
                                 ? toy_forward(features, shared)
                                 : toy_forward(features, cfg.asr);
      for (std::size_t k = 0; k < targets.size(); ++k) {
        const Level level = cfg.forward_levels[k];
        const RepSequence& rep = level == Level::Pre ? reps.pre : level == Level::Enc ? reps.enc : reps.dec;
        if (level == Level::Input) continue;
        store(rep, targets[k], key);
        ++out.written;
      }
    } catch (const Error& e) {
      out.error = inputs[i].filename().string() + ": " + e.what();
    }
  });
  return merge(outcomes);
}

// ---------------------------------------------------------------------------
// sim

std::vector<ScoreRow> compute_scores(const Manifest& manifest, const PipelineConfig& cfg) {
  const auto signals = unique_signals(manifest);
  struct Outcome {
    std::optional<SimilarityScore> score;
    std::string error;
  };
  std::vector<Outcome> outcomes(signals.size());
  parallel_for(signals.size(), cfg.jobs, [&](std::size_t i) {
    const auto& id = signals[i].signal_id;
    try {
      RepSequence seq[2][2];
      for (int side = 0; side < 2; ++side)
        for (int ch = 0; ch < 2; ++ch) {
          const fs::path p =
              cache_path(cfg.cache_dir, cfg.level, id, static_cast<Side>(side), static_cast<Channel>(ch));
          if (!fs::exists(p)) throw DataError("missing representation " + p.string());
          seq[side][ch] = read_reps(p);
        }
      const BinauralRep ref{seq[0][0], seq[0][1]};
      const BinauralRep proc{seq[1][0], seq[1][1]};
      outcomes[i].score = binaural_sim(ref, proc, cfg.dtw_radius);
    } catch (const Error& e) {
      outcomes[i].error = e.what();
    }
  });

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < signals.size(); ++i) index[signals[i].signal_id] = i;

  std::vector<ScoreRow> rows;
  for (const auto& t : manifest.trials) {
    const Outcome& o = outcomes[index.at(t.signal_id)];
    ScoreRow r{t.signal_id, t.listener_id, t.system_id, cfg.level, std::nullopt, 0, o.error};
    if (o.score) {
      r.raw_score = o.score->value;
      r.zero_norm_frames = o.score->zero_norm_frames;
    }
    rows.push_back(std::move(r));
  }
  std::sort(rows.begin(), rows.end(), [](const ScoreRow& a, const ScoreRow& b) {
    return std::tie(a.signal_id, a.listener_id) < std::tie(b.signal_id, b.listener_id);
  });
  return rows;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string number(const std::optional<double>& v) { return v ? number(*v) : std::string(); }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

constexpr const char* kScoreHeader = "signal_id,listener_id,system_id,level,raw_score,zero_norm_frames,error";

}  // namespace

void write_scores_csv(const fs::path& path, const std::vector<ScoreRow>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << "# generated " << utc_timestamp() << '\n' << kScoreHeader << '\n';
  for (const auto& r : rows) {
    out << csv_field(r.signal_id) << ',' << csv_field(r.listener_id) << ',' << csv_field(r.system_id)
        << ',' << to_string(r.level) << ',' << number(r.raw_score) << ',' << r.zero_norm_frames << ','
        << csv_field(r.error) << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<ScoreRow> read_scores_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scores '" + path.string() + "'");
  std::vector<ScoreRow> rows;
  std::string line;
  bool header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kScoreHeader) throw DataError(path.string() + ": unexpected header");
      header = true;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 7 fields");
    ScoreRow r;
    r.signal_id = f[0];
    r.listener_id = f[1];
    r.system_id = f[2];
    r.level = parse_level(f[3]);
    try {
      if (!f[4].empty()) r.raw_score = std::stod(f[4]);
      r.zero_norm_frames = std::stoul(f[5]);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
    r.error = f[6];
    rows.push_back(std::move(r));
  }
  if (!header) throw DataError(path.string() + ": missing header");
  return rows;
}

StageResult cmd_sim(const Manifest& manifest, const PipelineConfig& cfg, const fs::path& scores_csv) {
  const auto rows = compute_scores(manifest, cfg);
  write_scores_csv(scores_csv, rows);
  StageResult r;
  r.total_units = rows.size();
  r.written = 1;
  for (const auto& row : rows)
    if (!row.raw_score) {
      ++r.failed_units;
      r.errors.push_back("trial (" + row.signal_id + ", " + row.listener_id + "): " + row.error);
    }
  return r;
}

// ---------------------------------------------------------------------------
// fit / eval

namespace {

using TrialKey = std::pair<std::string, std::string>;

std::map<TrialKey, const ScoreRow*> index_scores(const std::vector<ScoreRow>& scores) {
  std::map<TrialKey, const ScoreRow*> idx;
  for (const auto& s : scores) idx[{s.signal_id, s.listener_id}] = &s;
  return idx;
}

}  // namespace

FitResult cmd_fit(const std::vector<ScoreRow>& scores, const Manifest& manifest, FitSplit split) {
  const auto idx = index_scores(scores);
  std::vector<std::pair<double, double>> pairs;
  for (const auto& t : manifest.trials) {
    const bool selected = t.split == Split::Dev || (split == FitSplit::TrainAll && t.split == Split::Train);
    if (!selected) continue;
    const auto it = idx.find({t.signal_id, t.listener_id});
    if (it == idx.end() || !it->second->raw_score) continue;
    if (!t.has_correctness())
      throw DataError("trial (" + t.signal_id + ", " + t.listener_id + ") in the fit split has no correctness");
    pairs.emplace_back(*it->second->raw_score, t.correctness);
  }
  if (pairs.empty()) throw DataError("fit split has no scored trials");

  FitResult fit;
  fit.params = fit_logistic(pairs);
  fit.n_dev = pairs.size();
  std::vector<double> mapped, wcs;
  for (const auto& [x, y] : pairs) {
    mapped.push_back(logistic(x, fit.params));
    wcs.push_back(y);
  }
  fit.fit_rmse = rmse(mapped, wcs);
  return fit;
}

void write_params_json(const fs::path& path, const FitResult& fit) {
  ordered_json j{{"a", fit.params.a}, {"b", fit.params.b}, {"fit_rmse", fit.fit_rmse}, {"n_dev", fit.n_dev}};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

LogisticParams read_params_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open params '" + path.string() + "'");
  try {
    const json j = json::parse(in);
    return {j.at("a").get<double>(), j.at("b").get<double>()};
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

EvalOutputs cmd_eval(const std::vector<ScoreRow>& scores, const LogisticParams& params,
                     const Manifest& manifest, const PipelineConfig& cfg) {
  const auto idx = index_scores(scores);
  std::vector<PredictionRecord> records;
  for (const auto& t : manifest.trials) {
    if (t.split != Split::Eval) continue;
    const auto it = idx.find({t.signal_id, t.listener_id});
    if (it == idx.end() || !it->second->raw_score) continue;
    if (!t.has_correctness())
      throw DataError("eval trial (" + t.signal_id + ", " + t.listener_id + ") has no correctness");
    records.push_back({t.signal_id, t.listener_id, t.system_id, *it->second->raw_score, 0.0, t.correctness});
  }
  if (records.empty()) throw DataError("eval split has no scored trials");
  std::sort(records.begin(), records.end(), [](const PredictionRecord& a, const PredictionRecord& b) {
    return std::tie(a.signal_id, a.listener_id) < std::tie(b.signal_id, b.listener_id);
  });
  records = apply_mapping(std::move(records), params);

  EvalOutputs out;
  out.params = params;
  for (Grouping g : cfg.groupings) out.reports.push_back(group_aggregate(records, g));
  return out;
}

namespace {

ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json report_json(const EvalReport& r) {
  ordered_json j{{"grouping", to_string(r.grouping)},
                 {"n_trials", r.n_trials},
                 {"n_points", r.n_points},
                 {"rmse", opt(r.rmse)},
                 {"ncc", opt(r.ncc)},
                 {"kt", opt(r.kt)},
                 {"rmse_raw", opt(r.rmse_raw)},
                 {"ncc_raw", opt(r.ncc_raw)}};
  if (r.grouping != Grouping::Trial) {
    ordered_json groups = ordered_json::array();
    for (const auto& g : r.groups)
      groups.push_back({{"id", g.id},
                        {"n", g.n},
                        {"mean_wcs", g.mean_wcs},
                        {"se_wcs", g.se_wcs},
                        {"mean_pred", g.mean_pred},
                        {"se_pred", g.se_pred},
                        {"mean_raw", g.mean_raw}});
    j["groups"] = std::move(groups);
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace

void write_reports(const fs::path& out_dir, const EvalOutputs& outputs) {
  fs::create_directories(out_dir);
  ordered_json doc{{"params", {{"a", outputs.params.a}, {"b", outputs.params.b}}},
                   {"reports", ordered_json::object()}};
  std::ostringstream summary;
  summary << "grouping,n_trials,n_points,rmse,ncc,kt,rmse_raw,ncc_raw\n";
  for (const auto& r : outputs.reports) {
    doc["reports"][to_string(r.grouping)] = report_json(r);
    summary << to_string(r.grouping) << ',' << r.n_trials << ',' << r.n_points << ',' << number(r.rmse) << ','
            << number(r.ncc) << ',' << number(r.kt) << ',' << number(r.rmse_raw) << ','
            << number(r.ncc_raw) << '\n';
    if (r.grouping == Grouping::Trial) continue;
    std::ostringstream rows;
    rows << "id,n,mean_wcs,se_wcs,mean_pred,se_pred,mean_raw\n";
    for (const auto& g : r.groups)
      rows << csv_field(g.id) << ',' << g.n << ',' << number(g.mean_wcs) << ',' << number(g.se_wcs) << ','
           << number(g.mean_pred) << ',' << number(g.se_pred) << ',' << number(g.mean_raw) << '\n';
    write_text(out_dir / ("report_" + to_string(r.grouping) + ".csv"), rows.str());
  }
  write_text(out_dir / "report.json", doc.dump(2) + "\n");
  write_text(out_dir / "report.csv", summary.str());
}

}  // namespace hrsim
