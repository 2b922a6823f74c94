#include "hrsim/feats.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>

namespace hrsim {

int FeatConfig::window_samples(int sample_rate) const {
  return static_cast<int>(std::lround(sample_rate * window_ms / 1000.0));
}

int FeatConfig::hop_samples(int sample_rate) const {
  return static_cast<int>(std::lround(sample_rate * hop_ms / 1000.0));
}

int FeatConfig::fft_points(int sample_rate) const {
  if (fft_size > 0) return fft_size;
  int n = 1;
  while (n < window_samples(sample_rate)) n <<= 1;
  return n;
}

double FeatConfig::upper_hz(int sample_rate) const {
  return fmax_hz > 0.0 ? fmax_hz : sample_rate / 2.0;
}

void FeatConfig::validate(int sample_rate) const {
  if (sample_rate <= 0) throw UsageError("sample rate must be positive");
  if (n_mels < 1) throw UsageError("n_mels must be positive");
  if (!(window_ms > 0.0) || !(hop_ms > 0.0)) throw UsageError("window and hop must be positive");
  if (window_ms < hop_ms) throw UsageError("window_ms must be >= hop_ms");
  if (window_samples(sample_rate) < 1 || hop_samples(sample_rate) < 1)
    throw UsageError("window or hop shorter than one sample");
  if (fft_points(sample_rate) < window_samples(sample_rate))
    throw UsageError("fft_size smaller than the analysis window");
  if (!(log_floor > 0.0)) throw UsageError("log_floor must be positive");
  if (!(fmin_hz >= 0.0) || !(fmin_hz < upper_hz(sample_rate)) ||
      upper_hz(sample_rate) > sample_rate / 2.0)
    throw UsageError("require 0 <= fmin < fmax <= sample_rate/2");
}

int frame_count(std::size_t n_samples, const FeatConfig& cfg, int sample_rate) {
  cfg.validate(sample_rate);
  const auto win = static_cast<std::size_t>(cfg.window_samples(sample_rate));
  const auto hop = static_cast<std::size_t>(cfg.hop_samples(sample_rate));
  if (n_samples < win)
    throw DataError("signal of " + std::to_string(n_samples) + " samples is shorter than one " +
                    std::to_string(win) + "-sample window");
  return static_cast<int>((n_samples - win) / hop + 1);
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

// n_mels + 2 equally mel-spaced edge frequencies.
std::vector<double> mel_edges(const FeatConfig& cfg, int sample_rate) {
  const double lo = hz_to_mel(cfg.fmin_hz);
  const double hi = hz_to_mel(cfg.upper_hz(sample_rate));
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * i / (cfg.n_mels + 1));
  return edges;
}

}  // namespace

std::vector<double> mel_band_centers(const FeatConfig& cfg, int sample_rate) {
  cfg.validate(sample_rate);
  const auto edges = mel_edges(cfg, sample_rate);
  return {edges.begin() + 1, edges.end() - 1};
}

MatrixD mel_filterbank(const FeatConfig& cfg, int sample_rate) {
  cfg.validate(sample_rate);
  const int n_fft = cfg.fft_points(sample_rate);
  const int n_bins = n_fft / 2 + 1;
  const auto edges = mel_edges(cfg, sample_rate);

  MatrixD fb = MatrixD::Zero(cfg.n_mels, n_bins);
  for (int b = 0; b < cfg.n_mels; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      const double w = std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid));
      if (w > 0.0) fb(b, k) = w;
    }
    if (fb.row(b).sum() <= 0.0)
      throw UsageError("mel band " + std::to_string(b) +
                       " contains no FFT bin; use fewer bands or a larger fft_size");
  }
  return fb;
}

RepSequence logmel(std::span<const double> samples, const FeatConfig& cfg, int sample_rate) {
  const int n_frames = frame_count(samples.size(), cfg, sample_rate);
  const int win = cfg.window_samples(sample_rate);
  const int hop = cfg.hop_samples(sample_rate);
  const int n_fft = cfg.fft_points(sample_rate);
  const int n_bins = n_fft / 2 + 1;
  const MatrixD fb = mel_filterbank(cfg, sample_rate);

  // Periodic Hann window.
  std::vector<double> window(win);
  for (int n = 0; n < win; ++n)
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / win);

  Eigen::FFT<double> fft;
  std::vector<double> frame(n_fft, 0.0);
  std::vector<std::complex<double>> spectrum;
  VectorD power(n_bins);
  MatrixD energies(n_frames, cfg.n_mels);

  for (int t = 0; t < n_frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * hop;
    for (int n = 0; n < win; ++n) frame[n] = samples[start + n] * window[n];
    std::fill(frame.begin() + win, frame.end(), 0.0);
    fft.fwd(spectrum, frame);
    for (int k = 0; k < n_bins; ++k) power(k) = std::norm(spectrum[k]);
    energies.row(t) = (fb * power).transpose();
  }

  MatrixD logs = energies.unaryExpr([&](double e) { return std::log(std::max(e, cfg.log_floor)); });
  if (cfg.normalize) {
    const RowVector<double> mean = logs.colwise().mean();
    logs.rowwise() -= mean;
    for (int b = 0; b < cfg.n_mels; ++b) {
      // A band pinned at the floor is constant; its residual is rounding noise.
      const double sd = std::sqrt(logs.col(b).squaredNorm() / n_frames);
      if (sd > 1e-9 * (1.0 + std::abs(mean(b)))) logs.col(b) /= sd;
    }
  }

  RepSequence rep;
  rep.level = Level::Input;
  rep.data = logs.cast<float>();
  return rep;
}

}  // namespace hrsim
