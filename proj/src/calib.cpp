#include "hrsim/calib.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_map>

#include "hrsim/common.hpp"

namespace hrsim {

double logistic(double x, const LogisticParams& p) {
  const double z = p.a * x + p.b;
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

namespace {

void check_lists(std::span<const double> pred, std::span<const double> truth, std::size_t min_len) {
  if (pred.size() != truth.size())
    throw UsageError("prediction and truth lengths differ (" + std::to_string(pred.size()) + " vs " +
                     std::to_string(truth.size()) + ")");
  if (pred.size() < min_len)
    throw UsageError("need at least " + std::to_string(min_len) + " values");
  for (auto list : {pred, truth})
    for (double v : list)
      if (!std::isfinite(v)) throw DataError("non-finite value in metric input");
}

// Mean squared error of the logistic map on standardized scores.
struct FitObjective {
  std::vector<double> z, y;

  double operator()(double a, double b) const {
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double r = logistic(z[i], {a, b}) - y[i];
      total += r * r;
    }
    return total / static_cast<double>(z.size());
  }
};

struct Candidate {
  double a, b, f;
};

Candidate golden_section_b(const FitObjective& obj, double a, double lo, double hi, int iters) {
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
  double f1 = obj(a, x1), f2 = obj(a, x2);
  for (int k = 0; k < iters; ++k) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = obj(a, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = obj(a, x2);
    }
  }
  return f1 <= f2 ? Candidate{a, x1, f1} : Candidate{a, x2, f2};
}

Candidate nelder_mead(const FitObjective& obj, Candidate start, int max_iters) {
  using Point = std::array<double, 2>;
  std::array<Point, 3> x{Point{start.a, start.b},
                         Point{start.a + std::max(0.5, 0.1 * std::abs(start.a)), start.b},
                         Point{start.a, start.b + std::max(0.5, 0.1 * std::abs(start.b))}};
  std::array<double, 3> f{};
  for (int k = 0; k < 3; ++k) f[k] = obj(x[k][0], x[k][1]);

  auto along = [](const Point& from, const Point& to, double t) {
    return Point{from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])};
  };

  for (int it = 0; it < max_iters; ++it) {
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int i, int j) { return f[i] < f[j]; });
    const int best = order[0], mid = order[1], worst = order[2];
    const double spread = f[worst] - f[best];
    const double size = std::max(std::abs(x[worst][0] - x[best][0]) + std::abs(x[worst][1] - x[best][1]),
                                 std::abs(x[mid][0] - x[best][0]) + std::abs(x[mid][1] - x[best][1]));
    if (spread <= 1e-20 && size <= 1e-10) break;

    const Point centroid{(x[best][0] + x[mid][0]) / 2.0, (x[best][1] + x[mid][1]) / 2.0};
    const Point refl = along(x[worst], centroid, 2.0);
    const double fr = obj(refl[0], refl[1]);
    if (fr < f[best]) {
      const Point exp = along(x[worst], centroid, 3.0);
      const double fe = obj(exp[0], exp[1]);
      if (fe < fr) {
        x[worst] = exp;
        f[worst] = fe;
      } else {
        x[worst] = refl;
        f[worst] = fr;
      }
    } else if (fr < f[mid]) {
      x[worst] = refl;
      f[worst] = fr;
    } else {
      const bool outside = fr < f[worst];
      const Point con = outside ? along(x[worst], centroid, 1.5) : along(x[worst], centroid, 0.5);
      const double fc = obj(con[0], con[1]);
      if (fc < std::min(fr, f[worst])) {
        x[worst] = con;
        f[worst] = fc;
      } else {
        for (int k : {mid, worst}) {
          x[k] = along(x[best], x[k], 0.5);
          f[k] = obj(x[k][0], x[k][1]);
        }
      }
    }
  }
  const auto k = static_cast<std::size_t>(std::min_element(f.begin(), f.end()) - f.begin());
  return {x[k][0], x[k][1], f[k]};
}

}  // namespace

LogisticParams fit_logistic(std::span<const std::pair<double, double>> pairs,
                            const FitOptions& options) {
  if (pairs.size() < 3) throw DataError("logistic fit needs at least 3 pairs");
  FitObjective obj;
  for (const auto& [x, y] : pairs) {
    if (!std::isfinite(x) || !std::isfinite(y)) throw DataError("non-finite value in fit data");
    obj.z.push_back(x);
    obj.y.push_back(y);
  }
  const double n = static_cast<double>(pairs.size());
  const double mean = std::accumulate(obj.z.begin(), obj.z.end(), 0.0) / n;
  double var = 0.0;
  for (double x : obj.z) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 0.0)) throw DataError("degenerate fit input: all raw scores are equal");
  for (double& x : obj.z) x = (x - mean) / sd;

  const auto [zmin_it, zmax_it] = std::minmax_element(obj.z.begin(), obj.z.end());
  const double zmin = *zmin_it, zmax = *zmax_it;

  Candidate best{0.0, 0.0, obj(0.0, 0.0)};
  for (int ia = 0; ia < options.a_grid_points; ++ia) {
    const double a = -100.0 + 100.0 * ia / (options.a_grid_points - 1);
    // Offsets that put the curve's midpoint anywhere over (and beyond) the data.
    const double lo = -a * zmin - 20.0, hi = -a * zmax + 20.0;
    const double step = (hi - lo) / (options.b_scan_points - 1);
    int best_k = 0;
    double best_f = obj(a, lo);
    for (int k = 1; k < options.b_scan_points; ++k) {
      const double f = obj(a, lo + step * k);
      if (f < best_f) {
        best_f = f;
        best_k = k;
      }
    }
    Candidate c = golden_section_b(obj, a, lo + step * std::max(0, best_k - 1),
                                   lo + step * std::min(options.b_scan_points - 1, best_k + 1),
                                   options.golden_iterations);
    if (best_f < c.f) c = {a, lo + step * best_k, best_f};
    if (c.f < best.f) best = c;
  }

  // Restarting once guards against a collapsed simplex.
  for (int round = 0; round < 2; ++round) {
    const Candidate refined = nelder_mead(obj, best, options.nelder_mead_iterations);
    if (refined.f <= best.f) best = refined;
  }

  return {best.a / sd, best.b - best.a * mean / sd};
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_lists(pred, truth, 1);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(total / static_cast<double>(pred.size()));
}

double ncc(std::span<const double> pred, std::span<const double> truth) {
  check_lists(pred, truth, 2);
  const double n = static_cast<double>(pred.size());
  const double mp = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
  const double mt = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dx = pred[i] - mp, dy = truth[i] - mt;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("correlation undefined: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

// Pairs within runs of equal values in an already sorted sequence.
template <typename Equal>
std::int64_t tied_pairs(std::size_t n, Equal equal) {
  std::int64_t total = 0, run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && equal(i - 1, i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

// Sorts `v` ascending and returns the number of strict inversions.
std::int64_t count_inversions(std::vector<double>& v) {
  std::vector<double> buf(v.size());
  std::int64_t swaps = 0;
  for (std::size_t width = 1; width < v.size(); width *= 2) {
    for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, v.size()), hi = std::min(lo + 2 * width, v.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          swaps += static_cast<std::int64_t>(mid - i);
          buf[k++] = v[j++];
        } else {
          buf[k++] = v[i++];
        }
      }
      while (i < mid) buf[k++] = v[i++];
      while (j < hi) buf[k++] = v[j++];
    }
    v.swap(buf);
  }
  return swaps;
}

}  // namespace

double kendall_tau(std::span<const double> pred, std::span<const double> truth, TauVariant variant) {
  check_lists(pred, truth, 2);
  const std::size_t n = pred.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    return pred[i] < pred[j] || (pred[i] == pred[j] && truth[i] < truth[j]);
  });

  const std::int64_t n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t n1 = tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return pred[idx[a]] == pred[idx[b]];
  });
  const std::int64_t n3 = tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return pred[idx[a]] == pred[idx[b]] && truth[idx[a]] == truth[idx[b]];
  });
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = truth[idx[k]];
  const std::int64_t discordant = count_inversions(t);
  const std::int64_t n2 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return t[a] == t[b]; });

  const std::int64_t c_minus_d = n0 - n1 - n2 + n3 - 2 * discordant;
  if (variant == TauVariant::A) return static_cast<double>(c_minus_d) / static_cast<double>(n0);
  const std::int64_t untied_pred = n0 - n1, untied_truth = n0 - n2;
  if (untied_pred == 0 || untied_truth == 0)
    throw DataError("Kendall's tau undefined: every pair is tied in one input");
  return static_cast<double>(c_minus_d) /
         std::sqrt(static_cast<double>(untied_pred) * static_cast<double>(untied_truth));
}

std::string to_string(Grouping g) {
  switch (g) {
    case Grouping::Trial: return "trial";
    case Grouping::Listener: return "listener";
    case Grouping::System: return "system";
  }
  return "?";
}

Grouping parse_grouping(const std::string& name) {
  if (name == "trial") return Grouping::Trial;
  if (name == "listener") return Grouping::Listener;
  if (name == "system") return Grouping::System;
  throw UsageError("unknown grouping '" + name + "' (expected trial, listener or system)");
}

std::vector<PredictionRecord> apply_mapping(std::vector<PredictionRecord> records,
                                            const LogisticParams& p) {
  for (auto& r : records) r.mapped_score = logistic(r.raw_score, p);
  return records;
}

namespace {

template <typename F>
std::optional<double> defined(F&& f) {
  try {
    return f();
  } catch (const Error&) {
    return std::nullopt;
  }
}

void score(EvalReport& rep, const std::vector<double>& mapped, const std::vector<double>& raw,
           const std::vector<double>& wcs) {
  rep.n_points = wcs.size();
  rep.rmse = defined([&] { return rmse(mapped, wcs); });
  rep.ncc = defined([&] { return ncc(mapped, wcs); });
  rep.kt = defined([&] { return kendall_tau(raw, wcs); });
  rep.rmse_raw = defined([&] { return rmse(raw, wcs); });
  rep.ncc_raw = defined([&] { return ncc(raw, wcs); });
}

double standard_error(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

}  // namespace

EvalReport trial_report(std::span<const PredictionRecord> records) {
  if (records.empty()) throw DataError("no records to evaluate");
  std::vector<double> mapped, raw, wcs;
  for (const auto& r : records) {
    mapped.push_back(r.mapped_score);
    raw.push_back(r.raw_score);
    wcs.push_back(r.correctness);
  }
  EvalReport rep;
  rep.grouping = Grouping::Trial;
  rep.n_trials = records.size();
  score(rep, mapped, raw, wcs);
  return rep;
}

EvalReport group_aggregate(std::span<const PredictionRecord> records, Grouping by) {
  if (by == Grouping::Trial) return trial_report(records);
  if (records.empty()) throw DataError("no records to evaluate");

  // Groups in order of first appearance.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const PredictionRecord*>> members;
  for (const auto& r : records) {
    const std::string& key = by == Grouping::Listener ? r.listener_id : r.system_id;
    if (key.empty()) throw DataError("record '" + r.signal_id + "' lacks a " + to_string(by) + " id");
    auto [it, inserted] = members.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }

  EvalReport rep;
  rep.grouping = by;
  rep.n_trials = records.size();
  std::vector<double> mapped, raw, wcs;
  for (const auto& key : order) {
    const auto& group = members.at(key);
    std::vector<double> gw, gp, gr;
    for (const auto* r : group) {
      gw.push_back(r->correctness);
      gp.push_back(r->mapped_score);
      gr.push_back(r->raw_score);
    }
    const double cnt = static_cast<double>(group.size());
    GroupSummary s;
    s.id = key;
    s.n = group.size();
    s.mean_wcs = std::accumulate(gw.begin(), gw.end(), 0.0) / cnt;
    s.mean_pred = std::accumulate(gp.begin(), gp.end(), 0.0) / cnt;
    s.mean_raw = std::accumulate(gr.begin(), gr.end(), 0.0) / cnt;
    s.se_wcs = standard_error(gw, s.mean_wcs);
    s.se_pred = standard_error(gp, s.mean_pred);
    rep.groups.push_back(s);
    mapped.push_back(s.mean_pred);
    raw.push_back(s.mean_raw);
    wcs.push_back(s.mean_wcs);
  }
  score(rep, mapped, raw, wcs);
  return rep;
}

}  // namespace hrsim
