// Copyright 2026 The sasvkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SASV_IO_HPP_
#define SASV_IO_HPP_

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sasv/core_model.hpp"
#include "sasv/matrix.hpp"
#include "sasv/error.hpp"
#include "sasv/metrics.hpp"
#include "sasv/moe_fusion.hpp"

namespace sasv {

// Text embeddings:   <id> <v1> ... <vD>        (shortest round-trip floats)
// Binary embeddings: "SASVEMB1", u32 D, u32 count, then per record
//                    u16 id length, id bytes, D x f32; all little-endian.
// Trials:            <enroll_id> <test_id> [target|nontarget|spoof]
// Scores:            <enroll_id> <test_id> <score> [label]
// Lines starting with '#' and blank lines are ignored in text formats.

inline constexpr std::string_view kBinaryMagic = "SASVEMB1";

enum class EmbeddingFormat { kAuto, kText, kBinary };

namespace detail {

inline std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Calls fn(line_number, fields) for every non-comment, non-blank line.
template <typename Fn>
void ForEachRecordLine(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = SplitFields(line);
    if (fields.empty() || fields[0].front() == '#') continue;
    fn(lineno, fields);
  }
}

template <typename T>
bool ParseNumber(std::string_view s, T* out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, *out);
  return ec == std::errc() && ptr == end;
}

inline std::string ShortestFloat(float v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline bool ValidUtf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t n;
    std::uint32_t cp;
    if (c < 0x80) { ++i; continue; }
    if ((c & 0xE0) == 0xC0) { n = 1; cp = c & 0x1F; }
    else if ((c & 0xF0) == 0xE0) { n = 2; cp = c & 0x0F; }
    else if ((c & 0xF8) == 0xF0) { n = 3; cp = c & 0x07; }
    else return false;
    if (i + n >= s.size()) return false;
    for (std::size_t k = 1; k <= n; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if ((n == 1 && cp < 0x80) || (n == 2 && cp < 0x800) || (n == 3 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
      return false;
    i += n + 1;
  }
  return true;
}

inline bool ValidId(std::string_view id) {
  if (id.empty() || !ValidUtf8(id)) return false;
  for (char c : id)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\0') return false;
  return true;
}

inline std::ifstream OpenIn(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream OpenOut(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  return out;
}

inline void PutU16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xFF));
  buf.push_back(static_cast<char>(v >> 8));
}

inline void PutU32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t GetU32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

}  // namespace detail

// ---- embeddings -----------------------------------------------------------

namespace detail {

/// Parses `<id> <v1> ... <vD>` rows with a constant D, calling
/// fn(line, id, values) per row.
template <typename T, typename Fn>
void ParseRowsText(std::istream& in, const std::string& source, Fn&& fn) {
  std::size_t dim = 0;
  ForEachRecordLine(in, [&](std::size_t line, const std::vector<std::string_view>& f) {
    const std::string id(f[0]);
    if (!ValidId(id))
      throw ParseError(ErrorKind::kParse, source, line, ParseError::kNoOffset, "invalid utterance id");
    if (f.size() < 2)
      throw ParseError(ErrorKind::kParse, source, line, ParseError::kNoOffset,
                       "row '" + id + "' has no values");
    if (dim != 0 && f.size() - 1 != dim)
      throw ParseError(ErrorKind::kDimensionDrift, source, line, ParseError::kNoOffset,
                       "dimension " + std::to_string(f.size() - 1) + " after " + std::to_string(dim));
    dim = f.size() - 1;
    std::vector<T> values(dim);
    for (std::size_t i = 1; i < f.size(); ++i)
      if (!ParseNumber(f[i], &values[i - 1]))
        throw ParseError(ErrorKind::kParse, source, line, ParseError::kNoOffset,
                         "bad number '" + std::string(f[i]) + "'");
    try {
      fn(line, id, std::move(values));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.kind(), source, line, ParseError::kNoOffset, e.what());
    }
  });
}

}  // namespace detail

inline EmbeddingSet ParseEmbeddingsText(std::istream& in, const std::string& source = "") {
  EmbeddingSet set;
  detail::ParseRowsText<float>(in, source, [&](std::size_t, const std::string& id, std::vector<float> v) {
    set.add(Embedding(id, std::move(v)));
  });
  return set;
}

/// Named real-valued rows in the embedding text layout, without the
/// embedding invariants (zero rows allowed). Used for MoE layer and gate files.
struct NamedRows {
  std::vector<std::string> ids;
  Matrix values;
};

inline NamedRows ParseNamedRows(std::istream& in, const std::string& source = "") {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  detail::ParseRowsText<double>(in, source, [&](std::size_t, const std::string& id, std::vector<double> v) {
    for (double x : v)
      if (!std::isfinite(x)) throw Error(ErrorKind::kNonFinite, "non-finite value in row '" + id + "'");
    ids.push_back(id);
    rows.push_back(std::move(v));
  });
  NamedRows out{std::move(ids), Matrix(rows.size(), rows.empty() ? 0 : rows[0].size())};
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r].begin(), rows[r].end(), out.values.row(r).begin());
  return out;
}

inline NamedRows ReadNamedRows(const std::string& path) {
  auto in = detail::OpenIn(path);
  return ParseNamedRows(in, path);
}

inline void WriteEmbeddingsText(std::ostream& out, const EmbeddingSet& set) {
  for (const auto& e : set) {
    out << e.id();
    for (float v : e.values()) out << ' ' << detail::ShortestFloat(v);
    out << '\n';
  }
}

inline std::string EncodeEmbeddingsBinary(const EmbeddingSet& set) {
  if (set.size() > 0xFFFFFFFFu || set.dim() > 0xFFFFFFFFu)
    throw Error(ErrorKind::kBadParams, "embedding set too large for the binary format");
  std::string buf(kBinaryMagic);
  detail::PutU32(buf, static_cast<std::uint32_t>(set.dim()));
  detail::PutU32(buf, static_cast<std::uint32_t>(set.size()));
  for (const auto& e : set) {
    if (e.id().size() > 0xFFFF) throw Error(ErrorKind::kBadParams, "id too long: " + e.id());
    detail::PutU16(buf, static_cast<std::uint16_t>(e.id().size()));
    buf += e.id();
    for (float v : e.values()) detail::PutU32(buf, std::bit_cast<std::uint32_t>(v));
  }
  return buf;
}

inline void WriteEmbeddingsBinary(std::ostream& out, const EmbeddingSet& set) {
  const std::string buf = EncodeEmbeddingsBinary(set);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline EmbeddingSet DecodeEmbeddingsBinary(std::string_view bytes, const std::string& source = "") {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  auto fail = [&](ErrorKind kind, std::size_t offset, const std::string& what) -> ParseError {
    return ParseError(kind, source, 0, offset, what);
  };
  if (n < 16) throw fail(ErrorKind::kParse, n, "truncated header");
  if (bytes.substr(0, 8) != kBinaryMagic) throw fail(ErrorKind::kParse, 0, "bad magic");
  const std::uint32_t dim = detail::GetU32(p + 8);
  const std::uint32_t count = detail::GetU32(p + 12);
  if (dim == 0) throw fail(ErrorKind::kParse, 8, "dimension is 0");
  // Cheapest possible record is 2 + 1 + 4*dim bytes.
  if (count > 0 && (n - 16) / (3 + 4ull * dim) < count)
    throw fail(ErrorKind::kParse, 12, "record count " + std::to_string(count) + " exceeds file size");

  EmbeddingSet set(dim);
  std::size_t off = 16;
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::size_t rec = off;
    if (n - off < 2) throw fail(ErrorKind::kParse, off, "truncated record " + std::to_string(r));
    const std::size_t len = std::size_t(p[off]) | (std::size_t(p[off + 1]) << 8);
    off += 2;
    if (len == 0) throw fail(ErrorKind::kParse, rec, "empty id in record " + std::to_string(r));
    if (n - off < len + 4ull * dim)
      throw fail(ErrorKind::kParse, rec, "truncated record " + std::to_string(r));
    std::string id(bytes.substr(off, len));
    if (!detail::ValidId(id)) throw fail(ErrorKind::kParse, off, "invalid id in record " + std::to_string(r));
    off += len;
    std::vector<float> values(dim);
    for (std::uint32_t k = 0; k < dim; ++k, off += 4) {
      values[k] = std::bit_cast<float>(detail::GetU32(p + off));
      if (!std::isfinite(values[k]))
        throw fail(ErrorKind::kNonFinite, off, "non-finite value in record " + std::to_string(r));
    }
    try {
      set.add(Embedding(std::move(id), std::move(values)));
    } catch (const Error& e) {
      throw fail(e.kind(), rec, e.what());
    }
  }
  if (off != n) throw fail(ErrorKind::kParse, off, std::to_string(n - off) + " trailing bytes");
  return set;
}

inline EmbeddingSet ParseEmbeddings(std::istream& in, EmbeddingFormat format = EmbeddingFormat::kAuto,
                                    const std::string& source = "") {
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (format == EmbeddingFormat::kAuto)
    format = bytes.starts_with(kBinaryMagic) ? EmbeddingFormat::kBinary : EmbeddingFormat::kText;
  if (format == EmbeddingFormat::kBinary) return DecodeEmbeddingsBinary(bytes, source);
  std::istringstream text(bytes);
  return ParseEmbeddingsText(text, source);
}

inline EmbeddingSet ReadEmbeddings(const std::string& path, EmbeddingFormat format = EmbeddingFormat::kAuto) {
  auto in = detail::OpenIn(path, true);
  return ParseEmbeddings(in, format, path);
}

inline void WriteEmbeddings(const std::string& path, const EmbeddingSet& set,
                            EmbeddingFormat format = EmbeddingFormat::kText) {
  auto out = detail::OpenOut(path, format == EmbeddingFormat::kBinary);
  if (format == EmbeddingFormat::kBinary) WriteEmbeddingsBinary(out, set);
  else WriteEmbeddingsText(out, set);
  if (!out) throw Error(ErrorKind::kIo, "write to '" + path + "' failed");
}

// ---- trials and scores ----------------------------------------------------

inline std::vector<Trial> ParseTrials(std::istream& in, const std::string& source = "") {
  std::vector<Trial> out;
  detail::ForEachRecordLine(in, [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (f.size() != 2 && f.size() != 3)
      throw ParseError(ErrorKind::kParse, source, line, ParseError::kNoOffset,
                       "expected 2 or 3 fields, got " + std::to_string(f.size()));
    TrialLabel label = TrialLabel::kUnlabeled;
    if (f.size() == 3) {
      auto l = ParseTrialLabel(f[2]);
      if (!l) throw ParseError(ErrorKind::kParse, source, line, ParseError::kNoOffset, "unknown label");
      label = *l;
    }
    out.emplace_back(std::string(f[0]), std::string(f[1]), label);
  });
  return out;
}

inline void WriteTrials(std::ostream& out, std::span<const Trial> trials) {
  for (const auto& t : trials) {
    out << t.enroll_id << ' ' << t.test_id;
    if (t.label != TrialLabel::kUnlabeled) out << ' ' << TrialLabelName(t.label);
    out << '\n';
  }
}

/// At least 6 significant digits, and always enough to read back the exact
/// double.
inline std::string FormatScore(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%#.6g", v);
  double back = 0.0;
  std::string_view s(buf);
  if (detail::ParseNumber(s, &back) && back == v) return std::string(s);
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline ScoreSet ParseScores(std::istream& in, const std::string& source = "") {
  ScoreSet out;
  detail::ForEachRecordLine(in, [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (f.size() != 3 && f.size() != 4)
      throw ParseError(ErrorKind::kParse, source, line, ParseError::kNoOffset,
                       "expected 3 or 4 fields, got " + std::to_string(f.size()));
    double score = 0.0;
    if (!detail::ParseNumber(f[2], &score) || !std::isfinite(score))
      throw ParseError(ErrorKind::kParse, source, line, ParseError::kNoOffset,
                       "bad score '" + std::string(f[2]) + "'");
    TrialLabel label = TrialLabel::kUnlabeled;
    if (f.size() == 4) {
      auto l = ParseTrialLabel(f[3]);
      if (!l) throw ParseError(ErrorKind::kParse, source, line, ParseError::kNoOffset, "unknown label");
      label = *l;
    }
    try {
      out.add(Trial(std::string(f[0]), std::string(f[1]), label), score);
    } catch (const Error& e) {
      throw ParseError(e.kind(), source, line, ParseError::kNoOffset, e.what());
    }
  });
  return out;
}

inline void WriteScores(std::ostream& out, const ScoreSet& scores) {
  for (const auto& r : scores) {
    out << r.trial.enroll_id << ' ' << r.trial.test_id << ' ' << FormatScore(r.score);
    if (r.trial.label != TrialLabel::kUnlabeled) out << ' ' << TrialLabelName(r.trial.label);
    out << '\n';
  }
}

inline std::vector<Trial> ReadTrials(const std::string& path) {
  auto in = detail::OpenIn(path);
  return ParseTrials(in, path);
}

inline ScoreSet ReadScores(const std::string& path) {
  auto in = detail::OpenIn(path);
  return ParseScores(in, path);
}

inline void WriteScores(const std::string& path, const ScoreSet& scores) {
  auto out = detail::OpenOut(path);
  WriteScores(out, scores);
  if (!out) throw Error(ErrorKind::kIo, "write to '" + path + "' failed");
}

inline void WriteTrials(const std::string& path, std::span<const Trial> trials) {
  auto out = detail::OpenOut(path);
  WriteTrials(out, trials);
  if (!out) throw Error(ErrorKind::kIo, "write to '" + path + "' failed");
}

/// Attaches labels from `trials` to an unlabeled score set. Every scored
/// trial must be listed.
inline ScoreSet AttachLabels(const ScoreSet& scores, std::span<const Trial> trials) {
  std::unordered_map<TrialKey, TrialLabel, TrialKeyHash> labels;
  for (const auto& t : trials) labels[{t.enroll_id, t.test_id}] = t.label;
  ScoreSet out;
  for (const auto& r : scores) {
    auto it = labels.find({r.trial.enroll_id, r.trial.test_id});
    if (it == labels.end())
      throw Error(ErrorKind::kTrialMismatch, "scored trial " + r.trial.Describe() + " not in trial list");
    out.add(Trial(r.trial.enroll_id, r.trial.test_id, it->second), r.score);
  }
  return out;
}

// ---- configs and MoE inputs -----------------------------------------------

/// `key=value` lines with keys c_miss, c_fa_nontarget, c_fa_spoof,
/// pi_target, pi_nontarget, pi_spoof. Missing keys keep their defaults.
inline ADcfConfig ParseADcfConfig(std::istream& in, const std::string& source = "") {
  ADcfConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = detail::SplitFields(line);
    if (fields.empty() || fields[0].front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(ErrorKind::kParse, source, lineno, ParseError::kNoOffset, "expected key=value");
    auto trim = [](std::string_view s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
      return s;
    };
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto val = trim(std::string_view(line).substr(eq + 1));
    double v = 0.0;
    if (!detail::ParseNumber(val, &v))
      throw ParseError(ErrorKind::kParse, source, lineno, ParseError::kNoOffset, "bad value for '" + std::string(key) + "'");
    if (key == "c_miss") cfg.c_miss = v;
    else if (key == "c_fa_nontarget") cfg.c_fa_nontarget = v;
    else if (key == "c_fa_spoof") cfg.c_fa_spoof = v;
    else if (key == "pi_target") cfg.pi_target = v;
    else if (key == "pi_nontarget") cfg.pi_nontarget = v;
    else if (key == "pi_spoof") cfg.pi_spoof = v;
    else throw ParseError(ErrorKind::kParse, source, lineno, ParseError::kNoOffset, "unknown key '" + std::string(key) + "'");
  }
  cfg.Validate();
  return cfg;
}

/// Layer stack from a named-row file: one row per layer in depth order, the
/// last row being the final layer.
inline LayerStack LayerStackFromRows(const NamedRows& rows) {
  if (rows.values.rows() < 2) throw Error(ErrorKind::kDimensionMismatch, "layer file needs at least 2 rows");
  return LayerStack{rows.values};
}

/// Gate file: one row per non-final layer, each holding the D gate weights
/// followed by that layer's bias (D + 1 values).
inline GateParams GateFromRows(const NamedRows& rows, std::size_t top_k) {
  const Matrix& m = rows.values;
  if (m.rows() == 0 || m.cols() < 2)
    throw Error(ErrorKind::kDimensionMismatch, "gate file needs rows of at least 2 values");
  GateParams g{Matrix(m.rows(), m.cols() - 1), std::vector<double>(m.rows()), top_k, false};
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c + 1 < m.cols(); ++c) g.weight(r, c) = m(r, c);
    g.bias[r] = m(r, m.cols() - 1);
  }
  return g;
}

inline void WriteNamedRows(std::ostream& out, std::span<const std::string> ids, const Matrix& m) {
  char buf[64];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << ids[r];
    for (double v : m.row(r)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

inline std::string FormatMetric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace sasv

#endif  // SASV_IO_HPP_
