#include <cmath>
#include <limits>
#include <string>

#include "hrsim/losses.hpp"

namespace hrsim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kRowTolerance = 1e-9;
constexpr double kMaxPaths = 1e6;

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

void CtcInstance::validate() const {
  const auto vocab = log_probs.cols();
  if (log_probs.rows() < 1 || vocab < 2) throw UsageError("CTC needs T >= 1 and V >= 2");
  for (Eigen::Index t = 0; t < log_probs.rows(); ++t) {
    if ((log_probs.row(t).array() > 0.0).any() || log_probs.row(t).hasNaN())
      throw DataError("frame " + std::to_string(t) + " holds invalid log-probabilities");
    const double total = log_probs.row(t).array().exp().sum();
    if (std::abs(total - 1.0) > kRowTolerance)
      throw DataError("frame " + std::to_string(t) + " probabilities sum to " + std::to_string(total));
  }
  if (labels.empty()) throw UsageError("CTC label sequence is empty");
  for (int l : labels)
    if (l < 1 || l >= vocab)
      throw UsageError("label " + std::to_string(l) + " outside [1, " + std::to_string(vocab) + ")");
}

int ctc_min_frames(const std::vector<int>& labels) {
  int frames = static_cast<int>(labels.size());
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++frames;
  return frames;
}

double ctc_loss(const CtcInstance& inst) {
  inst.validate();
  const Eigen::Index frames = inst.log_probs.rows();
  if (ctc_min_frames(inst.labels) > frames)
    throw DataError("label sequence is unreachable in " + std::to_string(frames) + " frames");

  // Blank-expanded label: blank, l1, blank, l2, ..., blank.
  std::vector<int> ext(2 * inst.labels.size() + 1, 0);
  for (std::size_t i = 0; i < inst.labels.size(); ++i) ext[2 * i + 1] = inst.labels[i];
  const std::size_t s_len = ext.size();

  std::vector<double> alpha(s_len, kNegInf), next(s_len);
  alpha[0] = inst.log_probs(0, ext[0]);
  alpha[1] = inst.log_probs(0, ext[1]);
  for (Eigen::Index t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < s_len; ++s) {
      double acc = alpha[s];
      if (s >= 1) acc = log_add(acc, alpha[s - 1]);
      if (s >= 2 && ext[s] != 0 && ext[s] != ext[s - 2]) acc = log_add(acc, alpha[s - 2]);
      next[s] = acc == kNegInf ? kNegInf : acc + inst.log_probs(t, ext[s]);
    }
    alpha.swap(next);
  }
  const double total = log_add(alpha[s_len - 1], alpha[s_len - 2]);
  if (total == kNegInf) throw DataError("label sequence has zero probability");
  return -total;
}

std::vector<int> ctc_collapse(const std::vector<int>& path) {
  std::vector<int> out;
  int prev = -1;
  for (int p : path) {
    if (p != prev && p != 0) out.push_back(p);
    prev = p;
  }
  return out;
}

double ctc_brute_force(const CtcInstance& inst) {
  inst.validate();
  const auto frames = static_cast<int>(inst.log_probs.rows());
  const auto vocab = static_cast<int>(inst.log_probs.cols());
  if (std::pow(static_cast<double>(vocab), frames) > kMaxPaths)
    throw UsageError("brute-force CTC limited to 1e6 paths");
  if (static_cast<int>(inst.labels.size()) > frames)
    throw DataError("label longer than the number of frames");

  std::vector<int> path(frames, 0);
  double prob = 0.0;
  while (true) {
    if (ctc_collapse(path) == inst.labels) {
      double p = 1.0;
      for (int t = 0; t < frames; ++t) p *= std::exp(inst.log_probs(t, path[t]));
      prob += p;
    }
    int t = frames - 1;
    while (t >= 0 && ++path[t] == vocab) path[t--] = 0;
    if (t < 0) break;
  }
  if (prob <= 0.0) throw DataError("no frame path collapses to the label sequence");
  return -std::log(prob);
}

double seq2seq_loss(const MatrixD& true_dists, const MatrixD& pred_dists) {
  if (true_dists.rows() != pred_dists.rows() || true_dists.cols() != pred_dists.cols())
    throw UsageError("seq2seq distributions differ in shape");
  for (const MatrixD* m : {&true_dists, &pred_dists})
    for (Eigen::Index u = 0; u < m->rows(); ++u) {
      if ((m->row(u).array() < 0.0).any() || !m->row(u).allFinite())
        throw DataError("invalid probability row " + std::to_string(u));
      if (std::abs(m->row(u).sum() - 1.0) > kRowTolerance)
        throw DataError("probability row " + std::to_string(u) + " does not sum to 1");
    }
  double loss = 0.0;
  for (Eigen::Index u = 0; u < true_dists.rows(); ++u)
    for (Eigen::Index v = 0; v < true_dists.cols(); ++v) {
      const double p = true_dists(u, v);
      if (p == 0.0) continue;
      const double q = pred_dists(u, v);
      if (q == 0.0)
        throw DataError("prediction has zero mass where the target does not (position " +
                        std::to_string(u) + ")");
      loss += p * (std::log(p) - std::log(q));
    }
  return loss;
}

double joint_loss(double ctc, double s2s, const JointLossConfig& cfg) {
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) throw UsageError("lambda must lie in [0, 1]");
  if (!std::isfinite(ctc) || !std::isfinite(s2s)) throw DataError("non-finite loss term");
  return cfg.lambda * ctc + (1.0 - cfg.lambda) * s2s;
}

}  // namespace hrsim
