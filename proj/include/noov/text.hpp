#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "noov/error.hpp"

namespace noov::text {

/// Decodes one UTF-8 code point starting at `pos`. Returns the code point
/// and advances `pos`, or std::nullopt on a malformed sequence (pos is left
/// untouched in that case).
inline std::optional<char32_t> decode_utf8(std::string_view s, std::size_t& pos) {
  const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
  const unsigned char b0 = byte(pos);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  std::size_t len = 0;
  char32_t cp = 0;
  char32_t min = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2, cp = b0 & 0x1F, min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3, cp = b0 & 0x0F, min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4, cp = b0 & 0x07, min = 0x10000;
  } else {
    return std::nullopt;
  }
  if (pos + len > s.size()) return std::nullopt;
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char b = byte(pos + k);
    if ((b & 0xC0) != 0x80) return std::nullopt;
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return std::nullopt;
  pos += len;
  return cp;
}

/// Byte offset of the first invalid UTF-8 sequence, or npos if valid.
inline std::size_t find_invalid_utf8(std::string_view s) {
  std::size_t pos = 0;
  while (pos < s.size()) {
    if (!decode_utf8(s, pos)) return pos;
  }
  return std::string_view::npos;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

/// White_Space property code points.
inline bool is_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

/// Splits on Unicode whitespace. Never yields empty pieces. Malformed bytes
/// are kept inside the current piece.
inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t start = pos;
    const auto cp = decode_utf8(s, pos);
    if (!cp) {
      cur.push_back(s[start]);
      pos = start + 1;
      continue;
    }
    if (is_space(*cp)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.append(s.substr(start, pos - start));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Lower-cases ASCII, Latin-1 Supplement and the paired Latin Extended-A
/// letters; other code points pass through unchanged.
inline std::string fold_case(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t start = pos;
    auto cp = decode_utf8(s, pos);
    if (!cp) {
      out.push_back(s[start]);
      pos = start + 1;
      continue;
    }
    char32_t c = *cp;
    if (c >= 'A' && c <= 'Z') {
      c += 0x20;
    } else if (c >= 0xC0 && c <= 0xDE && c != 0xD7) {
      c += 0x20;
    } else if (c == 0x178) {
      c = 0xFF;
    } else if (c >= 0x100 && c <= 0x17F && c != 0x130 && c != 0x138 && c != 0x149 &&
               c != 0x17F) {
      // Latin Extended-A alternates upper/lower, with the parity flipping
      // after U+0138 and again after U+0148.
      const bool shifted = (c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E);
      const bool upper = shifted ? (c % 2 == 1) : (c % 2 == 0);
      if (upper) c += 1;
    }
    append_utf8(out, c);
  }
  return out;
}

inline std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.append(sep);
    out.append(tokens[i]);
  }
  return out;
}

/// Reads a whole file; throws IoError naming the path.
inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Reads a UTF-8 text file as LF-separated lines. A trailing newline does
/// not produce an extra empty line; a trailing CR on each line is removed.
/// Throws FormatError carrying the byte offset of invalid UTF-8.
inline std::vector<std::string> read_lines(const std::string& path) {
  const std::string data = read_file(path);
  if (const auto bad = find_invalid_utf8(data); bad != std::string_view::npos) {
    throw FormatError("invalid UTF-8 in '" + path + "' at byte offset " + std::to_string(bad));
  }
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < data.size()) {
    std::size_t end = data.find('\n', start);
    if (end == std::string::npos) end = data.size();
    std::string line = data.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::string data;
  for (const auto& l : lines) {
    data += l;
    data += '\n';
  }
  write_file(path, data);
}

}  // namespace noov::text
