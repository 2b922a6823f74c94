#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hrsim/common.hpp"

namespace hrsim {

enum class Level : std::uint8_t { Input = 0, Pre = 1, Enc = 2, Dec = 3 };
enum class Channel : std::uint8_t { Left = 0, Right = 1 };

std::string_view to_string(Level level);
std::string_view to_string(Channel channel);
Level parse_level(std::string_view name);

/// One channel's hidden representations at one level: T frames of d values.
/// Stored as float32, which is also the on-disk precision.
struct RepSequence {
  MatrixF data;
  Level level = Level::Input;
  Channel channel = Channel::Left;
  std::string signal_id;

  Eigen::Index frames() const { return data.rows(); }
  Eigen::Index dim() const { return data.cols(); }

  /// Throws DataError unless T >= 1, d >= 1 and every value is finite.
  void validate() const;

  bool operator==(const RepSequence& other) const;
};

/// Left/right representations of one binaural signal at one level.
struct BinauralRep {
  RepSequence left;
  RepSequence right;

  Level level() const { return left.level; }

  /// Same level and signal id on both sides; equal d below the decoder
  /// level, where frame counts must also agree.
  void validate() const;
};

/// .hrep files: "HREP" | u8 version | u8 level | u8 channel | u8 reserved |
/// u32 T | u32 d | u16 id length + UTF-8 id | T*d float32, all little-endian.
inline constexpr std::uint8_t kHrepVersion = 1;

std::vector<std::uint8_t> encode_reps(const RepSequence& rep);
RepSequence decode_reps(std::span<const std::uint8_t> bytes);

void write_reps(const RepSequence& rep, const std::filesystem::path& path);
RepSequence read_reps(const std::filesystem::path& path);

}  // namespace hrsim
