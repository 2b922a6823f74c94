#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <string>
#include <vector>

#include "hrsim/feats.hpp"
#include "support.hpp"

using namespace hrsim;
using namespace hrsim::test;

namespace {

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back(v >> 8);
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) b.push_back((v >> (8 * k)) & 0xff);
}

void put_tag(std::vector<std::uint8_t>& b, const char* tag) { b.insert(b.end(), tag, tag + 4); }

// Hand-assembled RIFF file; `payload` is the raw data chunk.
std::vector<std::uint8_t> riff(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                               std::uint16_t bits, const std::vector<std::uint8_t>& payload,
                               bool extensible = false) {
  std::vector<std::uint8_t> fmt;
  put_u16(fmt, extensible ? 0xFFFE : format);
  put_u16(fmt, channels);
  put_u32(fmt, rate);
  put_u32(fmt, rate * channels * bits / 8);
  put_u16(fmt, channels * bits / 8);
  put_u16(fmt, bits);
  if (extensible) {
    put_u16(fmt, 22);
    put_u16(fmt, bits);
    put_u32(fmt, channels == 2 ? 3 : 4);
    put_u16(fmt, format);  // subformat GUID starts with the format code
    const std::uint8_t rest[14] = {0x00, 0x00, 0x00, 0x00, 0x10, 0x00, 0x80, 0x00,
                                   0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71};
    fmt.insert(fmt.end(), rest, rest + 14);
  }
  std::vector<std::uint8_t> b;
  put_tag(b, "RIFF");
  put_u32(b, static_cast<std::uint32_t>(4 + 8 + fmt.size() + 8 + payload.size()));
  put_tag(b, "WAVE");
  put_tag(b, "fmt ");
  put_u32(b, static_cast<std::uint32_t>(fmt.size()));
  b.insert(b.end(), fmt.begin(), fmt.end());
  put_tag(b, "data");
  put_u32(b, static_cast<std::uint32_t>(payload.size()));
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

std::vector<std::uint8_t> pcm16(const std::vector<std::int16_t>& v) {
  std::vector<std::uint8_t> b;
  for (auto s : v) put_u16(b, static_cast<std::uint16_t>(s));
  return b;
}

}  // namespace

TEST_CASE("wav: pcm16 stereo decodes with 1/32768 scaling") {
  const auto sig = decode_wav(riff(1, 2, 44100, 16, pcm16({16384, -32768, 0, 32767, -16384, 1})));
  CHECK(sig.sample_rate_hz == 44100);
  REQUIRE(sig.size() == 3);
  CHECK(sig.left == std::vector<double>{0.5, 0.0, -0.5});
  CHECK(sig.right == std::vector<double>{-1.0, 32767.0 / 32768.0, 1.0 / 32768.0});
}

TEST_CASE("wav: mono is duplicated into both channels") {
  const auto sig = decode_wav(riff(1, 1, 16000, 16, pcm16({100, -200, 300})));
  CHECK(sig.left == sig.right);
  CHECK(sig.left[1] == -200.0 / 32768.0);
}

TEST_CASE("wav: float32 and extensible headers") {
  std::vector<std::uint8_t> payload;
  for (float f : {0.25f, -0.75f}) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32(payload, u);
  }
  const auto plain = decode_wav(riff(3, 2, 8000, 32, payload));
  CHECK(plain.left[0] == 0.25);
  CHECK(plain.right[0] == -0.75);
  const auto ext = decode_wav(riff(3, 2, 8000, 32, payload, true));
  CHECK(ext.left == plain.left);
  CHECK(ext.right == plain.right);
  const auto ext16 = decode_wav(riff(1, 1, 8000, 16, pcm16({16384}), true));
  CHECK(ext16.left[0] == 0.5);
}

TEST_CASE("wav: malformed input") {
  CHECK_THROWS_WITH_AS(decode_wav(riff(1, 2, 16000, 16, {})), doctest::Contains("zero-length"), DataError);
  auto bad = riff(1, 2, 16000, 16, pcm16({1, 2}));
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_wav(bad), DataError);
  CHECK_THROWS_AS(decode_wav(riff(1, 3, 16000, 16, pcm16({1, 2, 3}))), DataError);
  CHECK_THROWS_AS(decode_wav(riff(1, 2, 16000, 24, std::vector<std::uint8_t>(6))), DataError);
  CHECK_THROWS_AS(read_wav("/nonexistent/file.wav"), DataError);
}

TEST_CASE("wav: write/read round trip") {
  const auto dir = scratch_dir("wav_roundtrip");
  StereoSignal s;
  s.sample_rate_hz = 22050;
  for (int i = 0; i < 100; ++i) {
    s.left.push_back(static_cast<double>(i - 50) / 64.0);
    s.right.push_back(static_cast<double>(50 - i) / 128.0);
  }
  write_wav(dir / "a.wav", s, WavEncoding::Pcm16);
  const auto a = read_wav(dir / "a.wav");
  CHECK(a.left == s.left);  // multiples of 1/128 survive 16-bit quantization
  CHECK(a.right == s.right);
  write_wav(dir / "b.wav", s, WavEncoding::Float32);
  CHECK(read_wav(dir / "b.wav").left == s.left);
  write_wav(dir / "c.wav", s, WavEncoding::Pcm16, true);
  const auto c = read_wav(dir / "c.wav");
  CHECK(c.left == s.left);
  CHECK(c.right == s.left);
}

TEST_CASE("frame_count") {
  const FeatConfig cfg;
  CHECK(cfg.window_samples(16000) == 400);
  CHECK(cfg.hop_samples(16000) == 160);
  CHECK(frame_count(16000, cfg, 16000) == 98);
  CHECK(frame_count(400, cfg, 16000) == 1);
  CHECK(frame_count(560, cfg, 16000) == 2);
  CHECK(frame_count(559, cfg, 16000) == 1);
  CHECK_THROWS_AS(frame_count(399, cfg, 16000), DataError);
}

TEST_CASE("mel scale") {
  CHECK(hz_to_mel(0.0) == 0.0);
  CHECK(hz_to_mel(1000.0) == doctest::Approx(999.9856).epsilon(1e-6));
  for (double hz : {50.0, 440.0, 3000.0, 7999.0}) CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz));
}

TEST_CASE("filterbank: unit peaks at band centres, every band nonempty") {
  FeatConfig cfg;
  cfg.n_mels = 40;
  const int sr = 16000;
  const MatrixD fb = mel_filterbank(cfg, sr);
  REQUIRE(fb.rows() == 40);
  REQUIRE(fb.cols() == cfg.fft_points(sr) / 2 + 1);
  CHECK(fb.minCoeff() >= 0.0);
  CHECK(fb.maxCoeff() <= 1.0 + 1e-12);
  for (Eigen::Index b = 0; b < fb.rows(); ++b) CHECK(fb.row(b).maxCoeff() > 0.0);
  const auto centres = mel_band_centers(cfg, sr);
  REQUIRE(centres.size() == 40);
  for (std::size_t b = 1; b < centres.size(); ++b) CHECK(centres[b] > centres[b - 1]);

  FeatConfig too_many;
  too_many.n_mels = 200;
  CHECK_THROWS_AS(mel_filterbank(too_many, 8000), UsageError);
}

TEST_CASE("logmel: silence sits at the log floor") {
  const FeatConfig cfg;
  const std::vector<double> zeros(4000, 0.0);
  const RepSequence r = logmel(zeros, cfg, 16000);
  CHECK(r.level == Level::Input);
  CHECK(r.frames() == frame_count(4000, cfg, 16000));
  CHECK(r.dim() == 80);
  CHECK((r.data.array() == static_cast<float>(std::log(cfg.log_floor))).all());
}

TEST_CASE("logmel: matches a direct DFT of the windowed frame") {
  FeatConfig cfg;
  cfg.n_mels = 24;
  const int sr = 8000;
  const auto x = speechlike(3, sr, 0.2);
  const RepSequence r = logmel(x, cfg, sr);
  const MatrixD fb = mel_filterbank(cfg, sr);
  const int win = cfg.window_samples(sr), hop = cfg.hop_samples(sr), nfft = cfg.fft_points(sr);
  for (int t : {0, 3, static_cast<int>(r.frames()) - 1}) {
    const std::vector<double> frame(x.begin() + t * hop, x.begin() + t * hop + win);
    const auto p = dft_power(frame, nfft);
    for (int b = 0; b < cfg.n_mels; ++b) {
      double e = 0.0;
      for (int k = 0; k < static_cast<int>(p.size()); ++k) e += fb(b, k) * p[k];
      CHECK(r.data(t, b) == doctest::Approx(std::log(std::max(e, cfg.log_floor))).epsilon(1e-5));
    }
  }
}

TEST_CASE("logmel: a tone at a band centre peaks in that band") {
  const FeatConfig cfg;
  const int sr = 16000;
  const auto centres = mel_band_centers(cfg, sr);
  for (int k : {10, 30, 55, 70}) {
    std::vector<double> tone(sr / 2);
    for (std::size_t i = 0; i < tone.size(); ++i)
      tone[i] = 0.5 * std::sin(2.0 * std::numbers::pi * centres[k] * static_cast<double>(i) / sr);
    const RepSequence r = logmel(tone, cfg, sr);
    Eigen::Index arg;
    r.data.row(r.frames() / 2).maxCoeff(&arg);
    CHECK(arg == k);
  }
}

TEST_CASE("logmel: deterministic, optional normalization") {
  FeatConfig cfg;
  const auto x = speechlike(4, 16000, 0.5);
  const RepSequence a = logmel(x, cfg, 16000), b = logmel(x, cfg, 16000);
  CHECK(a == b);
  cfg.normalize = true;
  const RepSequence n = logmel(x, cfg, 16000);
  for (Eigen::Index band = 0; band < n.dim(); ++band)
    CHECK(std::abs(n.data.col(band).cast<double>().mean()) < 1e-5);
}

TEST_CASE("feat config validation") {
  FeatConfig cfg;
  cfg.hop_ms = 30.0;
  CHECK_THROWS_AS(cfg.validate(16000), UsageError);
  cfg = FeatConfig{};
  cfg.fmax_hz = 9000.0;
  CHECK_THROWS_AS(cfg.validate(16000), UsageError);
  cfg = FeatConfig{};
  cfg.fft_size = 256;
  CHECK_THROWS_AS(cfg.validate(16000), UsageError);
}
