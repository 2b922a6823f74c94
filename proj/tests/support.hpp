// Test-only helpers: random generators, independent oracles and synthetic
// audio. Nothing here calls the code paths it is used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "hrsim/common.hpp"
#include "hrsim/feats.hpp"
#include "hrsim/manifest.hpp"
#include "hrsim/repr.hpp"

namespace hrsim::test {

using Rng = std::mt19937_64;

inline MatrixF random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  MatrixF m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline RepSequence random_rep(Rng& rng, Eigen::Index frames, Eigen::Index dim, Level level,
                              Channel channel, const std::string& id) {
  RepSequence r;
  r.data = random_matrix(rng, frames, dim);
  r.level = level;
  r.channel = channel;
  r.signal_id = id;
  return r;
}

inline BinauralRep random_binaural(Rng& rng, Eigen::Index frames_left, Eigen::Index frames_right,
                                   Eigen::Index dim, Level level, const std::string& id) {
  return {random_rep(rng, frames_left, dim, level, Channel::Left, id),
          random_rep(rng, frames_right, dim, level, Channel::Right, id)};
}

/// Repeats every frame `factor` times.
inline MatrixF stretch(const MatrixF& m, int factor) {
  MatrixF out(m.rows() * factor, m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (int k = 0; k < factor; ++k) out.row(i * factor + k) = m.row(i);
  return out;
}

// ---------------------------------------------------------------------------
// Oracles

/// O(n^2) tau-b by explicit pair classification.
inline double kendall_tau_b_pairs(const std::vector<double>& x, const std::vector<double>& y) {
  std::int64_t concordant = 0, discordant = 0, tied_x = 0, tied_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const bool tx = x[i] == x[j], ty = y[i] == y[j];
      if (tx && ty) continue;
      if (tx) ++tied_x;
      else if (ty) ++tied_y;
      else if ((x[i] < x[j]) == (y[i] < y[j])) ++concordant;
      else ++discordant;
    }
  return static_cast<double>(concordant - discordant) /
         std::sqrt(static_cast<double>(concordant + discordant + tied_x) *
                   static_cast<double>(concordant + discordant + tied_y));
}

/// Pearson r from raw sums: (n Sxy - Sx Sy) / sqrt((n Sxx - Sx^2)(n Syy - Sy^2)).
inline double pearson_sums(const std::vector<double>& x, const std::vector<double>& y) {
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  const long double n = static_cast<long double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  return static_cast<double>((n * sxy - sx * sy) /
                             std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

inline double plain_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double dot = 0, na = 0, nb = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    dot += a(i) * b(i);
    na += a(i) * a(i);
    nb += b(i) * b(i);
  }
  return dot / std::sqrt(na * nb);
}

/// Enumerates every monotone warp path between lengths t1 and t2 (small only).
inline void for_each_warp_path(Eigen::Index t1, Eigen::Index t2,
                               const std::function<void(const std::vector<std::pair<Eigen::Index, Eigen::Index>>&)>& visit) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> path{{0, 0}};
  std::function<void()> rec = [&] {
    const auto [i, j] = path.back();
    if (i == t1 - 1 && j == t2 - 1) {
      visit(path);
      return;
    }
    const std::pair<Eigen::Index, Eigen::Index> steps[3] = {{i + 1, j + 1}, {i + 1, j}, {i, j + 1}};
    for (const auto& s : steps) {
      if (s.first >= t1 || s.second >= t2) continue;
      path.push_back(s);
      rec();
      path.pop_back();
    }
  };
  rec();
}

/// Minimum over all monotone paths of sum(1 - cos), by enumeration.
inline double brute_force_dtw_cost(const MatrixF& a, const MatrixF& b) {
  double best = std::numeric_limits<double>::infinity();
  for_each_warp_path(a.rows(), b.rows(), [&](const std::vector<std::pair<Eigen::Index, Eigen::Index>>& path) {
    double cost = 0.0;
    for (const auto& [i, j] : path)
      cost += 1.0 - plain_cosine(a.row(i).cast<double>().transpose(), b.row(j).cast<double>().transpose());
    best = std::min(best, cost);
  });
  return best;
}

/// Power spectrum of a Hann-windowed frame by a direct O(N^2) DFT.
inline std::vector<double> dft_power(const std::vector<double>& frame, int n_fft) {
  const int win = static_cast<int>(frame.size());
  std::vector<double> power(n_fft / 2 + 1);
  for (int k = 0; k <= n_fft / 2; ++k) {
    double re = 0, im = 0;
    for (int n = 0; n < win; ++n) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / win);
      const double angle = -2.0 * std::numbers::pi * k * n / n_fft;
      re += frame[n] * w * std::cos(angle);
      im += frame[n] * w * std::sin(angle);
    }
    power[k] = re * re + im * im;
  }
  return power;
}

// ---------------------------------------------------------------------------
// Synthetic audio

/// Voiced, speech-like test signal: a few harmonics under a gliding pitch
/// and a syllable-rate amplitude envelope. Deterministic in `seed`.
inline std::vector<double> speechlike(std::uint64_t seed, int sample_rate, double seconds) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double f0 = 90.0 + 120.0 * u(rng);
  const double glide = 0.2 * (u(rng) - 0.5);
  const double syllable_rate = 3.0 + 3.0 * u(rng);
  std::vector<double> amps(8);
  for (auto& a : amps) a = 0.2 + u(rng);
  const auto n = static_cast<std::size_t>(seconds * sample_rate);
  std::vector<double> x(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double f = f0 * (1.0 + glide * std::sin(2.0 * std::numbers::pi * 0.7 * t));
    phase += 2.0 * std::numbers::pi * f / sample_rate;
    const double env = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * syllable_rate * t);
    double v = 0.0;
    for (std::size_t h = 0; h < amps.size(); ++h)
      v += amps[h] / static_cast<double>(h + 1) * std::sin(static_cast<double>(h + 1) * phase);
    x[i] = 0.25 * env * v;
  }
  return x;
}

inline double power(const std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) p += v * v;
  return p / static_cast<double>(x.size());
}

/// x plus white Gaussian noise at the given SNR; infinite SNR returns x.
inline std::vector<double> add_noise(const std::vector<double>& x, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db)) return x;
  Rng rng(seed);
  const double sigma = std::sqrt(power(x) / std::pow(10.0, snr_db / 10.0));
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<double> y(x);
  for (double& v : y) v = std::clamp(v + n(rng), -1.0, 1.0);
  return y;
}

// ---------------------------------------------------------------------------
// Files

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hrsim_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// File contents without their first line.
inline std::string without_first_line(const std::string& text) {
  const auto pos = text.find('\n');
  return pos == std::string::npos ? std::string() : text.substr(pos + 1);
}

}  // namespace hrsim::test
