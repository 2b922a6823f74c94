#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace hrsim {

enum class Split { Train, Dev, Eval };

std::string to_string(Split s);
Split parse_split(const std::string& name);

/// One listening trial. `correctness` is the word correctness score in
/// [0, 1]; NaN marks a withheld score (JSON null).
struct TrialRecord {
  std::string signal_id;
  std::string listener_id;
  std::string system_id;
  double correctness = 0.0;
  std::filesystem::path ref_left, ref_right, proc_left, proc_right;
  Split split = Split::Train;

  bool has_correctness() const;
};

struct ManifestOptions {
  bool wcs_percent = false;  ///< scores given on 0-100; divided by 100 on load
  bool lenient = false;      ///< missing audio/representation files are reported, not fatal
  bool check_paths = true;
};

struct Manifest {
  std::vector<TrialRecord> trials;
  std::vector<std::string> issues;  ///< problems tolerated in lenient mode
  std::filesystem::path base_dir;
};

/// Parses a JSON array of trial objects. Relative paths resolve against the
/// manifest's directory. Rejects out-of-range scores and duplicate
/// (signal_id, listener_id) pairs.
Manifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options = {});
Manifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir,
                        const ManifestOptions& options = {});

}  // namespace hrsim
