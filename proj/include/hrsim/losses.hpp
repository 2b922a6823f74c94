#pragma once

#include <vector>

#include "hrsim/common.hpp"

namespace hrsim {

/// Per-frame log-probabilities (T x V, blank at index 0) and a target label
/// sequence over [1, V).
struct CtcInstance {
  MatrixD log_probs;
  std::vector<int> labels;

  /// Rows must be normalized within 1e-9 and labels in range and nonempty.
  void validate() const;
};

/// Fewest frames that can emit `labels`: one per label plus one blank between
/// each pair of equal neighbours.
int ctc_min_frames(const std::vector<int>& labels);

/// -log sum over all frame paths that collapse to the labels, by the forward
/// recursion over the blank-expanded label in log space. Throws DataError if
/// no path exists.
double ctc_loss(const CtcInstance& inst);

/// Same quantity by enumerating all V^T frame paths. Limited to 1e6 paths.
double ctc_brute_force(const CtcInstance& inst);

/// Collapse a frame path: merge repeats, then drop blanks.
std::vector<int> ctc_collapse(const std::vector<int>& path);

/// Sum over positions of KL(true_u || pred_u), with 0 log 0 = 0.
double seq2seq_loss(const MatrixD& true_dists, const MatrixD& pred_dists);

struct JointLossConfig {
  double lambda = 0.3;  ///< training weight; decoding uses 0.4

  static constexpr double kTrainingLambda = 0.3;
  static constexpr double kDecodingLambda = 0.4;
};

/// lambda * ctc + (1 - lambda) * seq2seq.
double joint_loss(double ctc, double s2s, const JointLossConfig& cfg);

}  // namespace hrsim
