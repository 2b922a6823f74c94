#include "hrsim/sim.hpp"

namespace hrsim {

Eigen::Index reconciled_length(Eigen::Index t_ref, Eigen::Index t_proc) {
  const Eigen::Index longer = std::max(t_ref, t_proc);
  const auto tolerance = std::max<Eigen::Index>(2, static_cast<Eigen::Index>(0.02 * static_cast<double>(longer)));
  if (std::abs(t_ref - t_proc) > tolerance)
    throw DataError("reference has " + std::to_string(t_ref) + " frames, processed has " +
                    std::to_string(t_proc) + "; difference exceeds " + std::to_string(tolerance));
  return std::min(t_ref, t_proc);
}

namespace {

void check_pair(const BinauralRep& ref, const BinauralRep& proc) {
  ref.validate();
  proc.validate();
  if (ref.level() != proc.level())
    throw DataError("reference is at level " + std::string(to_string(ref.level())) +
                    ", processed at " + std::string(to_string(proc.level())));
  if (ref.left.dim() != proc.left.dim())
    throw DataError("reference and processed representations differ in dimension");
}

}  // namespace

SimilarityScore framewise_binaural_sim(const BinauralRep& ref, const BinauralRep& proc) {
  check_pair(ref, proc);
  if (ref.level() == Level::Dec)
    throw UsageError("decoder-level sequences need the warped similarity");
  const Eigen::Index t = reconciled_length(ref.left.frames(), proc.left.frames());

  const detail::Frames rl(MatrixF(ref.left.data.topRows(t)));
  const detail::Frames rr(MatrixF(ref.right.data.topRows(t)));
  const detail::Frames pl(MatrixF(proc.left.data.topRows(t)));
  const detail::Frames pr(MatrixF(proc.right.data.topRows(t)));

  double total = 0.0;
  for (Eigen::Index k = 0; k < t; ++k) {
    total += std::max({detail::frame_cosine(rl, k, pl, k), detail::frame_cosine(rl, k, pr, k),
                       detail::frame_cosine(rr, k, pl, k), detail::frame_cosine(rr, k, pr, k)});
  }
  SimilarityScore score;
  score.value = total / static_cast<double>(t);
  score.level = ref.level();
  score.zero_norm_frames =
      rl.zero_norm_count() + rr.zero_norm_count() + pl.zero_norm_count() + pr.zero_norm_count();
  return score;
}

SimilarityScore binaural_warped_sim(const BinauralRep& ref, const BinauralRep& proc,
                                    Eigen::Index radius) {
  check_pair(ref, proc);
  if (ref.level() != Level::Dec) throw UsageError("warped similarity applies to decoder level only");

  const std::array<const RepSequence*, 2> refs{&ref.left, &ref.right};
  const std::array<const RepSequence*, 2> procs{&proc.left, &proc.right};
  double best = -std::numeric_limits<double>::infinity();
  for (const RepSequence* r : refs)
    for (const RepSequence* p : procs) {
      const WarpPath path = dtw_path_fast(r->data, p->data, radius);
      best = std::max(best, warped_sim(r->data, p->data, path));
    }

  SimilarityScore score;
  score.value = best;
  score.level = Level::Dec;
  for (const RepSequence* s : {&ref.left, &ref.right, &proc.left, &proc.right})
    score.zero_norm_frames += detail::Frames(s->data).zero_norm_count();
  return score;
}

SimilarityScore binaural_sim(const BinauralRep& ref, const BinauralRep& proc, Eigen::Index radius) {
  return ref.level() == Level::Dec ? binaural_warped_sim(ref, proc, radius)
                                   : framewise_binaural_sim(ref, proc);
}

}  // namespace hrsim
