#include "ewe/codec.hpp"

#include <algorithm>
#include <stdexcept>

namespace ewe::codec {

namespace {

// Unicode White_Space code points.
bool is_whitespace_cp(std::uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
    case 0x20: case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Decodes one code point starting at text[pos]. Returns false on malformed
// input; advances pos past the sequence on success.
bool next_codepoint(std::string_view text, std::size_t& pos, std::uint32_t& cp) {
  const auto byte = [&](std::size_t i) { return static_cast<std::uint8_t>(text[i]); };
  const std::uint8_t b0 = byte(pos);
  std::size_t len;
  if (b0 < 0x80) {
    cp = b0;
    pos += 1;
    return true;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return false;
  }
  if (pos + len > text.size()) return false;
  for (std::size_t i = 1; i < len; ++i) {
    const std::uint8_t b = byte(pos + i);
    if ((b & 0xC0) != 0x80) return false;
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr std::uint32_t kMinForLen[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMinForLen[len]) return false;                 // overlong
  if (cp >= 0xD800 && cp <= 0xDFFF) return false;         // surrogate
  if (cp > 0x10FFFF) return false;
  pos += len;
  return true;
}

std::vector<std::int32_t> special_material(std::int32_t id, int v) {
  std::vector<std::int32_t> m(static_cast<std::size_t>(v), kPadId);
  m[0] = id;
  return m;
}

void require_utf8(std::string_view text) {
  if (!utf8_valid(text)) throw std::invalid_argument("codec: input is not valid UTF-8");
}

EncodedSample from_materials(const std::vector<std::vector<std::int32_t>>& materials,
                             const CodecConfig& cfg) {
  EncodedSample out;
  out.ids.setConstant(cfg.u, cfg.v, kPadId);
  out.mask.assign(static_cast<std::size_t>(cfg.u), 0);
  const int n = std::min<int>(cfg.u, static_cast<int>(materials.size()));
  for (int i = 0; i < n; ++i) {
    bool any = false;
    for (int j = 0; j < cfg.v; ++j) {
      const std::int32_t id = materials[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      out.ids(i, j) = id;
      any = any || id != kPadId;
    }
    out.mask[static_cast<std::size_t>(i)] = any ? 1 : 0;
  }
  return out;
}

}  // namespace

void CodecConfig::validate() const {
  if (u < 1) throw std::invalid_argument("codec: u must be >= 1");
  if (v < 1) throw std::invalid_argument("codec: v must be >= 1");
}

bool utf8_valid(std::string_view text) {
  std::size_t pos = 0;
  std::uint32_t cp = 0;
  while (pos < text.size()) {
    if (!next_codepoint(text, pos, cp)) return false;
  }
  return true;
}

std::vector<std::string> tokenize_whitespace(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  std::size_t token_start = 0;
  bool in_token = false;
  while (pos < text.size()) {
    const std::size_t cp_start = pos;
    std::uint32_t cp = 0;
    if (!next_codepoint(text, pos, cp)) {
      // Callers validate; treat a stray byte as a token byte so we never loop.
      cp = 0xFFFD;
      pos = cp_start + 1;
    }
    if (is_whitespace_cp(cp)) {
      if (in_token) {
        tokens.emplace_back(text.substr(token_start, cp_start - token_start));
        in_token = false;
      }
    } else if (!in_token) {
      token_start = cp_start;
      in_token = true;
    }
  }
  if (in_token) tokens.emplace_back(text.substr(token_start));
  return tokens;
}

std::vector<std::int32_t> encode_token(std::string_view token, int v) {
  if (v < 1) throw std::invalid_argument("codec: v must be >= 1");
  std::vector<std::int32_t> ids(static_cast<std::size_t>(v), kPadId);
  const std::size_t n = std::min<std::size_t>(token.size(), static_cast<std::size_t>(v));
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = static_cast<std::int32_t>(static_cast<std::uint8_t>(token[i])) + kByteOffset;
  }
  return ids;
}

EncodedSample encode_sequence(std::string_view text, const CodecConfig& cfg) {
  cfg.validate();
  require_utf8(text);
  std::vector<std::vector<std::int32_t>> materials;
  if (cfg.prepend_cls) materials.push_back(special_material(kClsId, cfg.v));
  for (const std::string& token : tokenize_whitespace(text)) {
    if (static_cast<int>(materials.size()) >= cfg.u) break;
    materials.push_back(encode_token(token, cfg.v));
  }
  return from_materials(materials, cfg);
}

EncodedSample encode_byte_stream(std::string_view text, const CodecConfig& cfg) {
  cfg.validate();
  require_utf8(text);
  std::vector<std::vector<std::int32_t>> materials;
  for (std::size_t start = 0; start < text.size(); start += static_cast<std::size_t>(cfg.v)) {
    if (static_cast<int>(materials.size()) >= cfg.u) break;
    materials.push_back(encode_token(text.substr(start, static_cast<std::size_t>(cfg.v)), cfg.v));
  }
  return from_materials(materials, cfg);
}

EncodedSample encode(std::string_view text, const CodecConfig& cfg) {
  return cfg.mode == Mode::whitespace ? encode_sequence(text, cfg)
                                      : encode_byte_stream(text, cfg);
}

std::string decode_sample(const EncodedSample& sample, const CodecConfig& cfg) {
  std::string out;
  for (int i = 0; i < sample.u(); ++i) {
    std::string material;
    for (int j = 0; j < sample.v(); ++j) {
      const std::int32_t id = sample.ids(i, j);
      if (id < 0 || id >= kIdCount) throw std::runtime_error("codec: id out of range");
      if (id < kByteOffset) continue;  // specials and PAD carry no text
      material.push_back(static_cast<char>(id - kByteOffset));
    }
    if (material.empty()) continue;
    if (cfg.mode == Mode::whitespace && !out.empty()) out.push_back(' ');
    out += material;
  }
  if (!utf8_valid(out)) throw std::runtime_error("codec: sample does not decode to valid UTF-8");
  return out;
}

}  // namespace ewe::codec
