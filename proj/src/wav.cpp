#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "hrsim/feats.hpp"

namespace hrsim {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t u16_at(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t u32_at(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

void StereoSignal::validate() const {
  if (sample_rate_hz <= 0) throw DataError("sample rate must be positive");
  if (left.size() != right.size()) throw DataError("channel lengths differ");
  for (const auto* ch : {&left, &right})
    for (double s : *ch)
      if (!std::isfinite(s)) throw DataError("signal contains non-finite samples");
}

StereoSignal decode_wav(std::span<const std::uint8_t> bytes) {
  const std::uint8_t* p = bytes.data();
  if (bytes.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw DataError("not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = p + pos;
    std::size_t len = u32_at(chunk + 4);
    const std::size_t avail = bytes.size() - pos - 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || len > avail) throw DataError("malformed fmt chunk");
      format = u16_at(chunk + 8);
      channels = u16_at(chunk + 10);
      rate = u32_at(chunk + 12);
      bits = u16_at(chunk + 22);
      if (format == kFormatExtensible) {
        if (len < 40) throw DataError("malformed extensible fmt chunk");
        format = u16_at(chunk + 8 + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      // Streaming writers leave the size at 0xFFFFFFFF; take what is present.
      data = chunk + 8;
      data_len = std::min(len, avail);
      break;
    }
    pos += 8 + len + (len & 1);
  }
  if (!have_fmt) throw DataError("missing fmt chunk");
  if (data == nullptr) throw DataError("missing data chunk");
  if (channels != 1 && channels != 2)
    throw DataError("unsupported channel count " + std::to_string(channels));
  if (rate == 0) throw DataError("sample rate is zero");
  if (!((format == kFormatPcm && bits == 16) || (format == kFormatFloat && bits == 32)))
    throw DataError("unsupported encoding (format " + std::to_string(format) + ", " +
                    std::to_string(bits) + " bits); expected 16-bit PCM or 32-bit float");

  const std::size_t sample_bytes = bits / 8;
  const std::size_t frames = data_len / (sample_bytes * channels);
  if (frames == 0) throw DataError("zero-length audio");

  StereoSignal sig;
  sig.sample_rate_hz = static_cast<int>(rate);
  sig.left.resize(frames);
  sig.right.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* s = data + (f * channels + c) * sample_bytes;
      double v;
      if (format == kFormatPcm)
        v = static_cast<std::int16_t>(u16_at(s)) / 32768.0;
      else
        v = std::bit_cast<float>(u32_at(s));
      (c == 0 ? sig.left : sig.right)[f] = v;
    }
  }
  if (channels == 1) sig.right = sig.left;
  sig.validate();
  return sig;
}

StereoSignal read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_wav(const std::filesystem::path& path, const StereoSignal& signal, WavEncoding encoding,
               bool mono) {
  signal.validate();
  const std::uint16_t channels = mono ? 1 : 2;
  const std::uint16_t bits = encoding == WavEncoding::Pcm16 ? 16 : 32;
  const std::uint32_t block = channels * bits / 8;
  const std::uint64_t data_len = std::uint64_t{block} * signal.size();
  if (data_len + 36 > std::numeric_limits<std::uint32_t>::max())
    throw UsageError("signal too long for a RIFF file");

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_len);
  put_tag(out, "RIFF");
  put_u32(out, static_cast<std::uint32_t>(36 + data_len));
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, encoding == WavEncoding::Pcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, channels);
  put_u32(out, static_cast<std::uint32_t>(signal.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(signal.sample_rate_hz) * block);
  put_u16(out, static_cast<std::uint16_t>(block));
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, static_cast<std::uint32_t>(data_len));
  for (std::size_t f = 0; f < signal.size(); ++f) {
    for (std::uint16_t c = 0; c < channels; ++c) {
      const double v = (c == 0 ? signal.left : signal.right)[f];
      if (encoding == WavEncoding::Pcm16) {
        const double scaled = std::round(std::clamp(v, -1.0, 1.0) * 32768.0);
        put_u16(out, static_cast<std::uint16_t>(
                         static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0))));
      } else {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot open '" + path.string() + "' for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace hrsim
