#include "hrsim/manifest.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hrsim/common.hpp"

namespace hrsim {

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Eval: return "eval";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "dev") return Split::Dev;
  if (name == "eval") return Split::Eval;
  throw DataError("unknown split '" + name + "' (expected train, dev or eval)");
}

bool TrialRecord::has_correctness() const { return !std::isnan(correctness); }

namespace {

std::string required_string(const nlohmann::json& obj, const char* key, std::size_t index) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string() || it->get<std::string>().empty())
    throw DataError("trial " + std::to_string(index) + ": '" + key + "' must be a nonempty string");
  return it->get<std::string>();
}

}  // namespace

Manifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir,
                        const ManifestOptions& options) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("manifest must be a JSON array of trials");

  Manifest m;
  m.base_dir = base_dir;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& obj = doc[i];
    if (!obj.is_object()) throw DataError("trial " + std::to_string(i) + " is not an object");
    TrialRecord t;
    t.signal_id = required_string(obj, "signal_id", i);
    t.listener_id = required_string(obj, "listener_id", i);
    t.system_id = required_string(obj, "system_id", i);
    t.split = parse_split(required_string(obj, "split", i));

    const auto c = obj.find("correctness");
    if (c == obj.end()) throw DataError("trial " + std::to_string(i) + ": missing 'correctness'");
    if (c->is_null()) {
      t.correctness = std::numeric_limits<double>::quiet_NaN();
    } else if (c->is_number()) {
      t.correctness = c->get<double>() / (options.wcs_percent ? 100.0 : 1.0);
      if (!(t.correctness >= 0.0 && t.correctness <= 1.0))
        throw DataError("trial " + std::to_string(i) + " ('" + t.signal_id +
                        "'): correctness outside [0, 1]");
    } else {
      throw DataError("trial " + std::to_string(i) + ": 'correctness' must be a number or null");
    }

    for (auto [key, field] : {std::pair{"ref_left", &t.ref_left}, std::pair{"ref_right", &t.ref_right},
                              std::pair{"proc_left", &t.proc_left},
                              std::pair{"proc_right", &t.proc_right}}) {
      std::filesystem::path p = required_string(obj, key, i);
      *field = p.is_absolute() ? p : base_dir / p;
      if (options.check_paths && !std::filesystem::exists(*field)) {
        const std::string msg = "trial '" + t.signal_id + "': missing file " + field->string();
        if (!options.lenient) throw DataError(msg);
        m.issues.push_back(msg);
      }
    }

    if (!seen.emplace(t.signal_id, t.listener_id).second)
      throw DataError("duplicate trial (" + t.signal_id + ", " + t.listener_id + ")");
    m.trials.push_back(std::move(t));
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_manifest(text.str(), path.parent_path(), options);
}

}  // namespace hrsim
