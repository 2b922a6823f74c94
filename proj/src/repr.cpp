#include "hrsim/repr.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace hrsim {

std::string_view to_string(Level level) {
  switch (level) {
    case Level::Input: return "input";
    case Level::Pre: return "pre";
    case Level::Enc: return "enc";
    case Level::Dec: return "dec";
  }
  return "?";
}

std::string_view to_string(Channel channel) {
  return channel == Channel::Left ? "left" : "right";
}

Level parse_level(std::string_view name) {
  if (name == "input") return Level::Input;
  if (name == "pre") return Level::Pre;
  if (name == "enc") return Level::Enc;
  if (name == "dec") return Level::Dec;
  throw UsageError("unknown level '" + std::string(name) + "' (expected input, pre, enc or dec)");
}

void RepSequence::validate() const {
  if (data.rows() < 1 || data.cols() < 1)
    throw DataError("representation '" + signal_id + "' is empty");
  if (!data.allFinite())
    throw DataError("representation '" + signal_id + "' contains non-finite values");
}

bool RepSequence::operator==(const RepSequence& other) const {
  if (level != other.level || channel != other.channel || signal_id != other.signal_id)
    return false;
  if (data.rows() != other.data.rows() || data.cols() != other.data.cols()) return false;
  // Bitwise, so that -0.0f and 0.0f are told apart.
  return data.size() == 0 ||
         std::memcmp(data.data(), other.data.data(), sizeof(float) * data.size()) == 0;
}

void BinauralRep::validate() const {
  left.validate();
  right.validate();
  if (left.level != right.level)
    throw DataError("binaural pair mixes levels " + std::string(to_string(left.level)) + " and " +
                    std::string(to_string(right.level)));
  if (left.signal_id != right.signal_id)
    throw DataError("binaural pair mixes signals '" + left.signal_id + "' and '" +
                    right.signal_id + "'");
  if (left.dim() != right.dim())
    throw DataError("binaural pair '" + left.signal_id + "' has unequal dimensions");
  if (left.level != Level::Dec && left.frames() != right.frames())
    throw DataError("binaural pair '" + left.signal_id + "' has unequal frame counts at level " +
                    std::string(to_string(left.level)));
}

namespace {

constexpr char kMagic[4] = {'H', 'R', 'E', 'P'};
constexpr std::size_t kFixedHeader = 4 + 4 + 4 + 4 + 2;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(p[i]) << (8 * i);
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_reps(const RepSequence& rep) {
  rep.validate();
  if (rep.signal_id.size() > std::numeric_limits<std::uint16_t>::max())
    throw UsageError("signal id too long for .hrep header");
  if (rep.frames() > std::numeric_limits<std::uint32_t>::max() ||
      rep.dim() > std::numeric_limits<std::uint32_t>::max())
    throw UsageError("representation too large for .hrep header");

  std::vector<std::uint8_t> out;
  out.reserve(kFixedHeader + rep.signal_id.size() + 4 * rep.data.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kHrepVersion);
  out.push_back(static_cast<std::uint8_t>(rep.level));
  out.push_back(static_cast<std::uint8_t>(rep.channel));
  out.push_back(0);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rep.frames()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rep.dim()));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(rep.signal_id.size()));
  out.insert(out.end(), rep.signal_id.begin(), rep.signal_id.end());
  for (Eigen::Index i = 0; i < rep.data.size(); ++i)
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(rep.data.data()[i]));
  return out;
}

RepSequence decode_reps(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw DataError("bad magic");
  if (bytes.size() < kFixedHeader) throw DataError("truncated header");
  const std::uint8_t* p = bytes.data();
  if (p[4] != kHrepVersion)
    throw DataError("version mismatch: file has " + std::to_string(p[4]) + ", expected " +
                    std::to_string(kHrepVersion));
  if (p[5] > static_cast<std::uint8_t>(Level::Dec))
    throw DataError("invalid level byte " + std::to_string(p[5]));
  if (p[6] > static_cast<std::uint8_t>(Channel::Right))
    throw DataError("invalid channel byte " + std::to_string(p[6]));
  if (p[7] != 0) throw DataError("reserved header byte is nonzero");

  const auto frames = get_le<std::uint32_t>(p + 8);
  const auto dim = get_le<std::uint32_t>(p + 12);
  const auto id_len = get_le<std::uint16_t>(p + 16);
  if (frames == 0 || dim == 0) throw DataError("header declares an empty matrix");
  if (bytes.size() < kFixedHeader + id_len) throw DataError("truncated header");

  RepSequence rep;
  rep.level = static_cast<Level>(p[5]);
  rep.channel = static_cast<Channel>(p[6]);
  rep.signal_id.assign(reinterpret_cast<const char*>(p + kFixedHeader), id_len);

  const std::uint64_t count = std::uint64_t{frames} * dim;
  const std::uint64_t payload = bytes.size() - kFixedHeader - id_len;
  if (payload < 4 * count)
    throw DataError("truncated payload: header declares " + std::to_string(count) +
                    " floats, file holds " + std::to_string(payload / 4));
  if (payload > 4 * count) throw DataError("trailing bytes after payload");

  rep.data.resize(frames, dim);
  const std::uint8_t* q = p + kFixedHeader + id_len;
  for (std::uint64_t i = 0; i < count; ++i)
    rep.data.data()[i] = std::bit_cast<float>(get_le<std::uint32_t>(q + 4 * i));
  if (!rep.data.allFinite()) throw DataError("payload contains non-finite values");
  return rep;
}

void write_reps(const RepSequence& rep, const std::filesystem::path& path) {
  const auto bytes = encode_reps(rep);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

RepSequence read_reps(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_reps(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace hrsim
