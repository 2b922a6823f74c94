#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hrsim/common.hpp"
#include "hrsim/repr.hpp"

namespace hrsim {

/// Vectors with an L2 norm below this are treated as silent: cosine 0.
inline constexpr double kZeroNorm = 1e-12;

inline double cosine_from(double dot, double norm_a, double norm_b) {
  if (norm_a < kZeroNorm || norm_b < kZeroNorm) return 0.0;
  return std::clamp(dot / (norm_a * norm_b), -1.0, 1.0);
}

/// Cosine similarity of two vectors, accumulated in double. Returns 0 when
/// either norm is below kZeroNorm and bumps `zero_norm_hits` if given.
template <typename DerivedA, typename DerivedB>
double cosine(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
              std::size_t* zero_norm_hits = nullptr) {
  if (a.size() != b.size())
    throw UsageError("cosine of vectors with sizes " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  if (!a.allFinite() || !b.allFinite()) throw DataError("cosine of non-finite vector");
  const auto ad = a.template cast<double>().eval();
  const auto bd = b.template cast<double>().eval();
  const double na = ad.norm(), nb = bd.norm();
  if (zero_norm_hits && (na < kZeroNorm || nb < kZeroNorm)) ++*zero_norm_hits;
  return cosine_from(ad.reshaped().dot(bd.reshaped()), na, nb);
}

/// Monotone alignment between sequences of lengths T1 and T2.
struct WarpPath {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;

  Eigen::Index length() const { return static_cast<Eigen::Index>(pairs.size()); }

  /// Starts at (0,0), ends at (T1-1, T2-1), each step advances i, j or both by one.
  bool is_valid(Eigen::Index t1, Eigen::Index t2) const {
    if (pairs.empty() || pairs.front() != std::pair<Eigen::Index, Eigen::Index>{0, 0} ||
        pairs.back() != std::pair<Eigen::Index, Eigen::Index>{t1 - 1, t2 - 1})
      return false;
    for (std::size_t k = 1; k < pairs.size(); ++k) {
      const auto di = pairs[k].first - pairs[k - 1].first;
      const auto dj = pairs[k].second - pairs[k - 1].second;
      if (di < 0 || dj < 0 || di > 1 || dj > 1 || di + dj == 0) return false;
    }
    return true;
  }
};

struct SimilarityScore {
  double value = 0.0;
  Level level = Level::Input;
  std::size_t zero_norm_frames = 0;
};

namespace detail {

// Sequence copied to double with per-row norms, so that every cosine in the
// DTW and scoring paths comes from the same arithmetic.
struct Frames {
  MatrixD rows;
  VectorD norms;

  template <typename Scalar>
  explicit Frames(const Matrix<Scalar>& m) : rows(m.template cast<double>()), norms(m.rows()) {
    if (!rows.allFinite()) throw DataError("non-finite representation values");
    for (Eigen::Index i = 0; i < rows.rows(); ++i) norms(i) = rows.row(i).norm();
  }

  Eigen::Index size() const { return rows.rows(); }
  std::size_t zero_norm_count() const {
    return static_cast<std::size_t>((norms.array() < kZeroNorm).count());
  }
};

inline double frame_cosine(const Frames& a, Eigen::Index i, const Frames& b, Eigen::Index j) {
  return cosine_from(a.rows.row(i).dot(b.rows.row(j)), a.norms(i), b.norms(j));
}

inline double frame_distance(const Frames& a, Eigen::Index i, const Frames& b, Eigen::Index j) {
  return 1.0 - frame_cosine(a, i, b, j);
}

// Inclusive column range [lo[i], hi[i]] allowed in each row.
struct Window {
  std::vector<Eigen::Index> lo, hi;

  static Window full(Eigen::Index t1, Eigen::Index t2) {
    return {std::vector<Eigen::Index>(t1, 0), std::vector<Eigen::Index>(t1, t2 - 1)};
  }
  bool contains(Eigen::Index i, Eigen::Index j) const { return j >= lo[i] && j <= hi[i]; }
};

// DTW restricted to a window with steps (1,1), (1,0), (0,1). On equal
// accumulated cost the diagonal predecessor wins, then the i-advance.
inline WarpPath dtw_in_window(const Frames& a, const Frames& b, const Window& w) {
  const Eigen::Index t1 = a.size(), t2 = b.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> acc(t1);
  auto at = [&](Eigen::Index i, Eigen::Index j) {
    return (i < 0 || j < 0 || !w.contains(i, j)) ? inf : acc[i][j - w.lo[i]];
  };

  for (Eigen::Index i = 0; i < t1; ++i) {
    acc[i].assign(w.hi[i] - w.lo[i] + 1, inf);
    for (Eigen::Index j = w.lo[i]; j <= w.hi[i]; ++j) {
      const double d = frame_distance(a, i, b, j);
      if (i == 0 && j == 0) {
        acc[0][0 - w.lo[0]] = d;
        continue;
      }
      const double best = std::min({at(i - 1, j - 1), at(i - 1, j), at(i, j - 1)});
      acc[i][j - w.lo[i]] = best + d;
    }
  }
  if (!std::isfinite(at(t1 - 1, t2 - 1))) throw Error(ErrorKind::Internal, "DTW window is disconnected");

  WarpPath path;
  Eigen::Index i = t1 - 1, j = t2 - 1;
  path.pairs.emplace_back(i, j);
  while (i > 0 || j > 0) {
    const double diag = at(i - 1, j - 1), up = at(i - 1, j), left = at(i, j - 1);
    if (diag <= up && diag <= left) {
      --i;
      --j;
    } else if (up <= left) {
      --i;
    } else {
      --j;
    }
    path.pairs.emplace_back(i, j);
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

// Halves the time resolution by averaging adjacent frames; an odd tail frame
// is kept as is.
inline MatrixD coarsen(const MatrixD& m) {
  const Eigen::Index n = (m.rows() + 1) / 2;
  MatrixD out(n, m.cols());
  for (Eigen::Index k = 0; k < n; ++k)
    out.row(k) = 2 * k + 1 < m.rows() ? ((m.row(2 * k) + m.row(2 * k + 1)) * 0.5).eval()
                                      : m.row(2 * k).eval();
  return out;
}

// Projects a coarse path to full resolution and widens it by `radius` cells
// in every direction.
inline Window expand_window(const WarpPath& coarse, Eigen::Index t1, Eigen::Index t2,
                            Eigen::Index radius) {
  std::vector<Eigen::Index> pmin(t1, t2), pmax(t1, -1);
  for (const auto& [ci, cj] : coarse.pairs)
    for (Eigen::Index i = 2 * ci; i <= std::min(2 * ci + 1, t1 - 1); ++i) {
      pmin[i] = std::min(pmin[i], 2 * cj);
      pmax[i] = std::max(pmax[i], std::min(2 * cj + 1, t2 - 1));
    }
  Window w{std::vector<Eigen::Index>(t1), std::vector<Eigen::Index>(t1)};
  for (Eigen::Index i = 0; i < t1; ++i) {
    Eigen::Index lo = t2, hi = -1;
    for (Eigen::Index k = std::max<Eigen::Index>(0, i - radius); k <= std::min(t1 - 1, i + radius); ++k) {
      lo = std::min(lo, pmin[k]);
      hi = std::max(hi, pmax[k]);
    }
    w.lo[i] = std::max<Eigen::Index>(0, lo - radius);
    w.hi[i] = std::min(t2 - 1, hi + radius);
  }
  return w;
}

inline constexpr Eigen::Index kMinCoarsenFrames = 16;

inline WarpPath fast_dtw(const MatrixD& a, const MatrixD& b, Eigen::Index radius) {
  const Eigen::Index min_size = std::max(kMinCoarsenFrames, radius + 2);
  const Frames fa(a), fb(b);
  if (a.rows() < min_size || b.rows() < min_size)
    return dtw_in_window(fa, fb, Window::full(a.rows(), b.rows()));
  const WarpPath coarse = fast_dtw(coarsen(a), coarsen(b), radius);
  return dtw_in_window(fa, fb, expand_window(coarse, a.rows(), b.rows(), radius));
}

}  // namespace detail

/// Sum of (1 - cosine) over the aligned pairs.
template <typename Scalar>
double path_cost(const Matrix<Scalar>& h, const Matrix<Scalar>& h_hat, const WarpPath& path) {
  if (!path.is_valid(h.rows(), h_hat.rows())) throw UsageError("invalid warp path");
  const detail::Frames a(h), b(h_hat);
  double cost = 0.0;
  for (const auto& [i, j] : path.pairs) cost += detail::frame_distance(a, i, b, j);
  return cost;
}

/// Full O(T1*T2) DTW under the distance 1 - cosine.
template <typename Scalar>
WarpPath dtw_path_exact(const Matrix<Scalar>& h, const Matrix<Scalar>& h_hat) {
  if (h.rows() < 1 || h_hat.rows() < 1) throw DataError("DTW of an empty sequence");
  if (h.cols() != h_hat.cols()) throw UsageError("DTW sequences differ in dimension");
  const detail::Frames a(h), b(h_hat);
  return detail::dtw_in_window(a, b, detail::Window::full(h.rows(), h_hat.rows()));
}

/// Multilevel fast DTW: recursively aligns half-resolution copies, then
/// searches only a corridor of `radius` cells around the projected path.
/// Falls back to the exact DP below 16 frames (or radius + 2).
template <typename Scalar>
WarpPath dtw_path_fast(const Matrix<Scalar>& h, const Matrix<Scalar>& h_hat, Eigen::Index radius) {
  if (radius < 0) throw UsageError("DTW radius must be >= 0");
  if (h.rows() < 1 || h_hat.rows() < 1) throw DataError("DTW of an empty sequence");
  if (h.cols() != h_hat.cols()) throw UsageError("DTW sequences differ in dimension");
  return detail::fast_dtw(h.template cast<double>(), h_hat.template cast<double>(), radius);
}

/// Mean cosine over the aligned pairs of a warp path.
template <typename Scalar>
double warped_sim(const Matrix<Scalar>& h, const Matrix<Scalar>& h_hat, const WarpPath& path) {
  if (!path.is_valid(h.rows(), h_hat.rows())) throw UsageError("invalid warp path");
  if (h.cols() != h_hat.cols()) throw UsageError("sequences differ in dimension");
  const detail::Frames a(h), b(h_hat);
  double total = 0.0;
  for (const auto& [i, j] : path.pairs) total += detail::frame_cosine(a, i, b, j);
  return total / static_cast<double>(path.length());
}

/// Frame counts of reference and processed may differ by up to
/// max(2, 2% of the longer one); both are then cut to the shorter.
Eigen::Index reconciled_length(Eigen::Index t_ref, Eigen::Index t_proc);

/// Time-matched binaural similarity: the mean over frames of the best of the
/// four left/right cosine pairings. Levels input, pre and enc only.
SimilarityScore framewise_binaural_sim(const BinauralRep& ref, const BinauralRep& proc);

/// Warped binaural similarity for decoder-level sequences: each of the four
/// channel pairings gets its own fast-DTW path, and the best mean cosine wins.
SimilarityScore binaural_warped_sim(const BinauralRep& ref, const BinauralRep& proc,
                                    Eigen::Index radius = 10);

/// Dispatches on level: warped for dec, framewise otherwise.
SimilarityScore binaural_sim(const BinauralRep& ref, const BinauralRep& proc, Eigen::Index radius);

}  // namespace hrsim
