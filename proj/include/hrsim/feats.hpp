#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hrsim/common.hpp"
#include "hrsim/repr.hpp"

namespace hrsim {

/// Two equal-length channels of samples in [-1, 1].
struct StereoSignal {
  std::vector<double> left;
  std::vector<double> right;
  int sample_rate_hz = 0;

  std::size_t size() const { return left.size(); }
  const std::vector<double>& channel(Channel c) const { return c == Channel::Left ? left : right; }
  void validate() const;
};

enum class WavEncoding { Pcm16, Float32 };

/// Reads 16-bit PCM or 32-bit float RIFF/WAVE (plain or extensible header),
/// one or two channels. Mono input is duplicated into both channels.
StereoSignal read_wav(const std::filesystem::path& path);
StereoSignal decode_wav(std::span<const std::uint8_t> bytes);

/// Writes a two-channel file, or a mono one when `mono` is set (left only).
void write_wav(const std::filesystem::path& path, const StereoSignal& signal,
               WavEncoding encoding = WavEncoding::Pcm16, bool mono = false);

struct FeatConfig {
  int n_mels = 80;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 0;       ///< 0 selects the next power of two >= window length
  double fmin_hz = 0.0;
  double fmax_hz = 0.0;   ///< 0 selects the Nyquist frequency
  double log_floor = 1e-10;
  bool normalize = false; ///< per-utterance mean/variance normalization per band

  int window_samples(int sample_rate) const;
  int hop_samples(int sample_rate) const;
  int fft_points(int sample_rate) const;
  double upper_hz(int sample_rate) const;

  /// Throws UsageError if the configuration is inconsistent for this rate.
  void validate(int sample_rate) const;
};

int frame_count(std::size_t n_samples, const FeatConfig& cfg, int sample_rate);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Centre frequencies of the n_mels triangular filters, in Hz.
std::vector<double> mel_band_centers(const FeatConfig& cfg, int sample_rate);

/// n_mels x (fft/2 + 1) matrix of triangular, unit-peak filters on the
/// HTK mel scale spanning [fmin, fmax].
MatrixD mel_filterbank(const FeatConfig& cfg, int sample_rate);

/// Log mel filterbank energies of one channel, T x n_mels, at level Input.
/// Frames are Hann-windowed; values are ln(max(energy, log_floor)).
RepSequence logmel(std::span<const double> samples, const FeatConfig& cfg, int sample_rate);

}  // namespace hrsim
