#pragma once

#include "ewe/linalg.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ewe::codec {

// Reserved ids. Every byte b of the input maps to id b + kByteOffset, so the
// full id range is [0, 259].
inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kClsId = 1;
inline constexpr std::int32_t kSepId = 2;
inline constexpr std::int32_t kMaskId = 3;
inline constexpr std::int32_t kByteOffset = 4;
inline constexpr std::int32_t kIdCount = 260;

enum class Mode { whitespace, byte_stream };

struct CodecConfig {
  int u = 128;               // materials per sequence
  int v = 16;                // elements per material
  Mode mode = Mode::whitespace;
  bool prepend_cls = true;   // whitespace mode only
  bool use_sep = false;      // reserved, single-segment classification never emits [SEP]

  void validate() const;     // throws std::invalid_argument
};

struct EncodedSample {
  IdGrid ids;                    // u x v, every entry in [0, 259]
  std::vector<std::uint8_t> mask;  // mask[i] <=> material i has a non-PAD id

  int u() const { return static_cast<int>(ids.rows()); }
  int v() const { return static_cast<int>(ids.cols()); }
};

bool utf8_valid(std::string_view text);

// Maximal runs of non-whitespace code points (Unicode White_Space property).
// Assumes valid UTF-8; encode_sequence validates before calling.
std::vector<std::string> tokenize_whitespace(std::string_view text);

// UTF-8 bytes of the token, each + kByteOffset, padded with PAD or truncated
// to exactly v ids.
std::vector<std::int32_t> encode_token(std::string_view token, int v);

// Whitespace mode: optional [CLS] material, then one material per token,
// truncated/padded to u materials. A special token occupies a whole material
// as [id, PAD x (v-1)].
EncodedSample encode_sequence(std::string_view text, const CodecConfig& cfg);

// Tokenization-free mode: the raw byte stream (+offset) chunked into groups
// of v. No [CLS] material.
EncodedSample encode_byte_stream(std::string_view text, const CodecConfig& cfg);

// Dispatch on cfg.mode.
EncodedSample encode(std::string_view text, const CodecConfig& cfg);

// Strips specials and PAD, subtracts the offset, reassembles bytes.
// Whitespace mode joins materials with a single space. Throws
// std::runtime_error when the stripped bytes are not valid UTF-8.
std::string decode_sample(const EncodedSample& sample, const CodecConfig& cfg);

}  // namespace ewe::codec
