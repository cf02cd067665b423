#include "flowcll/fcs.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>

namespace flowcll::fcs {

std::string_view to_string(FcsErrc code) {
  switch (code) {
    case FcsErrc::UnknownVersion: return "UnknownVersion";
    case FcsErrc::MalformedOffset: return "MalformedOffset";
    case FcsErrc::BadOffsets: return "BadOffsets";
    case FcsErrc::Truncated: return "Truncated";
    case FcsErrc::MissingRequiredKeyword: return "MissingRequiredKeyword";
    case FcsErrc::EmptyValue: return "EmptyValue";
    case FcsErrc::UnterminatedSegment: return "UnterminatedSegment";
    case FcsErrc::InvalidKeywordValue: return "InvalidKeywordValue";
    case FcsErrc::InvalidParameter: return "InvalidParameter";
    case FcsErrc::LengthMismatch: return "LengthMismatch";
    case FcsErrc::UnsupportedByteOrder: return "UnsupportedByteOrder";
    case FcsErrc::UnsupportedDatatype: return "UnsupportedDatatype";
    case FcsErrc::UnsupportedMode: return "UnsupportedMode";
    case FcsErrc::InvalidDataset: return "InvalidDataset";
    case FcsErrc::Io: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(FcsVersion v) {
  switch (v) {
    case FcsVersion::Fcs20: return "FCS2.0";
    case FcsVersion::Fcs30: return "FCS3.0";
    case FcsVersion::Fcs31: return "FCS3.1";
  }
  return "FCS?";
}

namespace {

std::string with_offset(const std::string& what,
                        std::optional<std::uint64_t> offset) {
  if (!offset) return what;
  return what + " (at byte " + std::to_string(*offset) + ")";
}

} // namespace

FcsError::FcsError(FcsErrc code, const std::string& what,
                   std::optional<std::uint64_t> offset)
    : std::runtime_error(std::string(to_string(code)) + ": " +
                         with_offset(what, offset)),
      code_(code),
      offset_(offset),
      detail_(what) {}

bool KeywordLess::operator()(std::string_view a,
                             std::string_view b) const noexcept {
  return std::lexicographical_compare(
      a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
        return std::toupper(static_cast<unsigned char>(x)) <
               std::toupper(static_cast<unsigned char>(y));
      });
}

const std::string* TextSegment::find(std::string_view keyword) const {
  auto it = keywords.find(keyword);
  return it == keywords.end() ? nullptr : &it->second;
}

const std::string& TextSegment::at(std::string_view keyword) const {
  if (const auto* v = find(keyword)) return *v;
  throw FcsError(FcsErrc::MissingRequiredKeyword, std::string(keyword));
}

void TextSegment::set(std::string keyword, std::string value) {
  keywords.insert_or_assign(std::move(keyword), std::move(value));
}

std::optional<std::size_t> FcsDataset::find_parameter(
    std::string_view short_name) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].short_name == short_name) return i;
  }
  return std::nullopt;
}

std::uint64_t range_mask(double range) {
  if (!(range > 1.0)) return 0;
  if (range > 9.2e18) return std::numeric_limits<std::uint64_t>::max();
  auto r = static_cast<std::uint64_t>(std::ceil(range));
  return std::bit_ceil(r) - 1;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

std::optional<std::uint64_t> parse_uint(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

std::uint64_t keyword_uint(const TextSegment& text, std::string_view key) {
  const auto& raw = text.at(key);
  auto v = parse_uint(raw);
  if (!v) {
    throw FcsError(FcsErrc::InvalidKeywordValue,
                   std::string(key) + "='" + raw + "' is not an unsigned integer");
  }
  return *v;
}

std::string param_key(std::size_t n, char suffix) {
  return "$P" + std::to_string(n) + suffix;
}

char datatype_of(const TextSegment& text) {
  auto dt = trim(text.at("$DATATYPE"));
  if (dt.size() != 1) {
    throw FcsError(FcsErrc::UnsupportedDatatype,
                   "$DATATYPE='" + std::string(dt) + "'");
  }
  return static_cast<char>(std::toupper(static_cast<unsigned char>(dt[0])));
}

} // namespace

FcsHeader parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) {
    throw FcsError(FcsErrc::Truncated,
                   "header needs 58 bytes, got " + std::to_string(bytes.size()),
                   0);
  }
  FcsHeader h;
  std::string_view version(reinterpret_cast<const char*>(bytes.data()), 6);
  if (version == "FCS3.1") {
    h.version = FcsVersion::Fcs31;
  } else if (version == "FCS3.0") {
    h.version = FcsVersion::Fcs30;
  } else if (version == "FCS2.0") {
    h.version = FcsVersion::Fcs20;
  } else {
    std::string printable;
    for (char c : version)
      printable += std::isprint(static_cast<unsigned char>(c)) ? c : '?';
    throw FcsError(FcsErrc::UnknownVersion, "'" + printable + "'", 0);
  }

  std::uint64_t* fields[] = {&h.text_begin, &h.text_end,      &h.data_begin,
                             &h.data_end,   &h.analysis_begin, &h.analysis_end};
  for (std::size_t k = 0; k < 6; ++k) {
    const std::size_t at = 10 + 8 * k;
    std::string_view field(reinterpret_cast<const char*>(bytes.data()) + at, 8);
    auto t = trim(field);
    if (t.empty()) {
      *fields[k] = 0;
      continue;
    }
    auto v = parse_uint(t);
    if (!v || !std::all_of(t.begin(), t.end(), [](char c) {
          return c >= '0' && c <= '9';
        })) {
      throw FcsError(FcsErrc::MalformedOffset,
                     "offset field " + std::to_string(k + 1), at);
    }
    *fields[k] = *v;
  }

  if (h.text_begin > h.text_end) {
    throw FcsError(FcsErrc::BadOffsets, "TEXT begin after end", 10);
  }
  if ((h.data_begin || h.data_end) && h.data_begin > h.data_end) {
    throw FcsError(FcsErrc::BadOffsets, "DATA begin after end", 26);
  }
  return h;
}

TextSegment parse_text(std::span<const std::uint8_t> bytes, ByteRange range) {
  if (range.begin > range.end || range.end >= bytes.size()) {
    throw FcsError(FcsErrc::BadOffsets, "TEXT range outside file", range.begin);
  }
  TextSegment seg;
  const auto delim = bytes[range.begin];
  seg.delimiter = static_cast<char>(delim);

  std::vector<std::string> tokens;
  std::string cur;
  std::uint64_t token_start = range.begin + 1;
  std::uint64_t i = range.begin + 1;
  while (i <= range.end) {
    const auto c = bytes[i];
    if (c == delim) {
      if (i + 1 <= range.end && bytes[i + 1] == delim) {
        // A token may not open with an escaped delimiter: that encoding is
        // indistinguishable from an empty value.
        if (cur.empty()) {
          throw FcsError(FcsErrc::EmptyValue,
                         tokens.empty() ? std::string("empty keyword")
                                        : "empty value after '" + tokens.back() + "'",
                         i);
        }
        cur.push_back(static_cast<char>(delim));
        i += 2;
        continue;
      }
      if (cur.empty()) {
        throw FcsError(FcsErrc::EmptyValue, "empty token", i);
      }
      tokens.push_back(std::move(cur));
      cur.clear();
      token_start = i + 1;
      ++i;
      continue;
    }
    cur.push_back(static_cast<char>(c));
    ++i;
  }
  // Trailing padding after the final delimiter is tolerated.
  if (!cur.empty() && !trim(cur).empty() &&
      cur.find_first_not_of('\0') != std::string::npos) {
    throw FcsError(FcsErrc::UnterminatedSegment,
                   "TEXT ends inside a token", token_start);
  }
  if (tokens.size() % 2 != 0) {
    throw FcsError(FcsErrc::UnterminatedSegment,
                   "keyword '" + tokens.back() + "' has no value", range.end);
  }
  for (std::size_t k = 0; k < tokens.size(); k += 2) {
    seg.set(std::move(tokens[k]), std::move(tokens[k + 1]));
  }
  return seg;
}

void validate_text(const TextSegment& text, FcsVersion version) {
  const bool v3 = version != FcsVersion::Fcs20;
  std::vector<std::string_view> required = {"$PAR", "$TOT", "$DATATYPE",
                                            "$MODE", "$BYTEORD"};
  if (v3) {
    required.push_back("$BEGINDATA");
    required.push_back("$ENDDATA");
  }
  for (auto key : required) (void)text.at(key);

  const auto n_par = keyword_uint(text, "$PAR");
  (void)keyword_uint(text, "$TOT");
  // Each parameter needs at least three keywords; this also bounds the
  // per-parameter allocation by the TEXT size.
  if (n_par == 0 || n_par > text.keywords.size()) {
    throw FcsError(FcsErrc::InvalidKeywordValue,
                   "$PAR=" + std::to_string(n_par) + " is inconsistent with TEXT");
  }
  for (std::size_t n = 1; n <= n_par; ++n) {
    (void)text.at(param_key(n, 'B'));
    (void)text.at(param_key(n, 'N'));
    (void)text.at(param_key(n, 'R'));
    if (v3) (void)text.at(param_key(n, 'E'));
  }
}

std::vector<ParameterInfo> parse_parameters(const TextSegment& text,
                                            FcsVersion version) {
  const auto n_par = keyword_uint(text, "$PAR");
  if (n_par == 0 || n_par > text.keywords.size()) {
    throw FcsError(FcsErrc::InvalidKeywordValue, "$PAR out of range");
  }
  const char dt = datatype_of(text);

  std::vector<ParameterInfo> params;
  params.reserve(n_par);
  std::set<std::string> names;
  for (std::size_t n = 1; n <= n_par; ++n) {
    ParameterInfo p;
    p.index = n;
    p.short_name = text.at(param_key(n, 'N'));
    if (!names.insert(p.short_name).second) {
      throw FcsError(FcsErrc::InvalidParameter,
                     "duplicate $PnN '" + p.short_name + "'");
    }

    const auto& bits_raw = text.at(param_key(n, 'B'));
    auto bits = parse_uint(bits_raw);
    if (!bits) {
      throw FcsError(FcsErrc::InvalidParameter,
                     param_key(n, 'B') + "='" + bits_raw + "'");
    }
    p.bits = static_cast<unsigned>(std::min<std::uint64_t>(*bits, 4096));
    const bool ok = (dt == 'F' && p.bits == 32) || (dt == 'D' && p.bits == 64) ||
                    (dt == 'I' && (p.bits == 8 || p.bits == 16 ||
                                   p.bits == 32 || p.bits == 64)) ||
                    (dt != 'F' && dt != 'D' && dt != 'I');
    if (!ok) {
      throw FcsError(FcsErrc::InvalidParameter,
                     param_key(n, 'B') + "=" + bits_raw +
                         " not valid for $DATATYPE=" + std::string(1, dt));
    }

    const auto& range_raw = text.at(param_key(n, 'R'));
    auto range = parse_double(range_raw);
    if (!range || *range < 0) {
      throw FcsError(FcsErrc::InvalidParameter,
                     param_key(n, 'R') + "='" + range_raw + "'");
    }
    p.range = *range;

    if (const auto* amp = text.find(param_key(n, 'E'))) {
      auto comma = amp->find(',');
      std::optional<double> f1, f2;
      if (comma != std::string::npos) {
        f1 = parse_double(std::string_view(*amp).substr(0, comma));
        f2 = parse_double(std::string_view(*amp).substr(comma + 1));
      }
      if (!f1 || !f2) {
        throw FcsError(FcsErrc::InvalidParameter,
                       param_key(n, 'E') + "='" + *amp + "'");
      }
      p.amplification = {*f1, *f2};
    } else if (version != FcsVersion::Fcs20) {
      throw FcsError(FcsErrc::MissingRequiredKeyword, param_key(n, 'E'));
    }

    if (const auto* stain = text.find(param_key(n, 'S'))) p.stain = *stain;
    params.push_back(std::move(p));
  }
  return params;
}

namespace {

template <typename T>
T load(const std::uint8_t* p, bool big_endian) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  const bool host_big = std::endian::native == std::endian::big;
  if (big_endian != host_big) {
    auto* b = reinterpret_cast<std::uint8_t*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

std::uint64_t load_uint(const std::uint8_t* p, unsigned bits, bool big_endian) {
  switch (bits) {
    case 8: return *p;
    case 16: return load<std::uint16_t>(p, big_endian);
    case 32: return load<std::uint32_t>(p, big_endian);
    default: return load<std::uint64_t>(p, big_endian);
  }
}

} // namespace

EventMatrix decode_data(std::span<const std::uint8_t> data,
                        const TextSegment& text,
                        std::span<const ParameterInfo> params) {
  const auto mode = trim(text.at("$MODE"));
  if (mode != "L" && mode != "l") {
    throw FcsError(FcsErrc::UnsupportedMode,
                   "$MODE='" + std::string(mode) + "', only list mode is supported");
  }
  const char dt = datatype_of(text);
  if (dt != 'I' && dt != 'F' && dt != 'D') {
    throw FcsError(FcsErrc::UnsupportedDatatype,
                   "$DATATYPE='" + std::string(1, dt) + "'");
  }
  const auto order = trim(text.at("$BYTEORD"));
  bool big_endian = false;
  if (order == "1,2,3,4") {
    big_endian = false;
  } else if (order == "4,3,2,1") {
    big_endian = true;
  } else {
    throw FcsError(FcsErrc::UnsupportedByteOrder,
                   "$BYTEORD='" + std::string(order) + "'");
  }

  const auto n_events = keyword_uint(text, "$TOT");
  const std::size_t n_params = params.size();
  std::uint64_t row_bytes = 0;
  for (const auto& p : params) {
    if (p.bits % 8 != 0 || p.bits == 0 || p.bits > 64) {
      throw FcsError(FcsErrc::InvalidParameter,
                     "$P" + std::to_string(p.index) + "B=" + std::to_string(p.bits));
    }
    row_bytes += p.bits / 8;
  }
  if (row_bytes != 0 &&
      n_events > std::numeric_limits<std::uint64_t>::max() / row_bytes) {
    throw FcsError(FcsErrc::LengthMismatch, "$TOT overflows segment size");
  }
  const std::uint64_t expected = n_events * row_bytes;
  if (expected != data.size()) {
    throw FcsError(FcsErrc::LengthMismatch,
                   "DATA has " + std::to_string(data.size()) + " bytes, $TOT x row = " +
                       std::to_string(expected));
  }

  EventMatrix m;
  m.n_events = static_cast<std::size_t>(n_events);
  m.n_params = n_params;
  m.values.resize(m.n_events * n_params);

  const bool host_little = std::endian::native == std::endian::little;
  if (dt == 'F' && !big_endian && host_little) {
    std::memcpy(m.values.data(), data.data(), data.size());
    return m;
  }

  std::vector<std::uint64_t> masks(n_params);
  for (std::size_t j = 0; j < n_params; ++j) masks[j] = range_mask(params[j].range);

  const std::uint8_t* p = data.data();
  float* out = m.values.data();
  for (std::size_t e = 0; e < m.n_events; ++e) {
    for (std::size_t j = 0; j < n_params; ++j) {
      const unsigned bits = params[j].bits;
      if (dt == 'F') {
        *out++ = load<float>(p, big_endian);
      } else if (dt == 'D') {
        *out++ = static_cast<float>(load<double>(p, big_endian));
      } else {
        *out++ = static_cast<float>(load_uint(p, bits, big_endian) & masks[j]);
      }
      p += bits / 8;
    }
  }
  return m;
}

FcsDataset parse_bytes(std::span<const std::uint8_t> bytes,
                       const ParseOptions& options) {
  FcsDataset ds;
  ds.header = parse_header(bytes);
  const auto& h = ds.header;
  const std::uint64_t size = bytes.size();

  if (h.text_begin < kHeaderSize || h.text_end >= size) {
    throw FcsError(FcsErrc::BadOffsets,
                   "TEXT [" + std::to_string(h.text_begin) + "," +
                       std::to_string(h.text_end) + "] outside file of " +
                       std::to_string(size) + " bytes",
                   10);
  }
  ds.text = parse_text(bytes, {h.text_begin, h.text_end});
  validate_text(ds.text, h.version);
  ds.params = parse_parameters(ds.text, h.version);

  const auto n_events = keyword_uint(ds.text, "$TOT");
  if (options.keywords_only) {
    ds.events.n_events = static_cast<std::size_t>(n_events);
    ds.events.n_params = ds.params.size();
    return ds;
  }

  std::uint64_t begin = h.data_begin;
  std::uint64_t end = h.data_end;
  if (begin == 0 && end == 0 && h.version != FcsVersion::Fcs20) {
    begin = keyword_uint(ds.text, "$BEGINDATA");
    end = keyword_uint(ds.text, "$ENDDATA");
  }

  std::span<const std::uint8_t> data;
  const bool empty_segment = n_events == 0 || (begin == 0 && end == 0);
  if (!empty_segment) {
    if (begin < kHeaderSize || begin > end || end >= size) {
      throw FcsError(FcsErrc::BadOffsets,
                     "DATA [" + std::to_string(begin) + "," + std::to_string(end) +
                         "] outside file of " + std::to_string(size) + " bytes",
                     begin);
    }
    data = bytes.subspan(begin, end - begin + 1);
  }
  try {
    ds.events = decode_data(data, ds.text, ds.params);
  } catch (const FcsError& e) {
    if (e.offset()) throw;
    throw FcsError(e.code(), e.detail(), begin);
  }
  return ds;
}

FcsDataset parse_file(const std::filesystem::path& path,
                      const ParseOptions& options) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FcsError(FcsErrc::Io, "cannot open " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  if (size && !in.read(reinterpret_cast<char*>(bytes.data()),
                       static_cast<std::streamsize>(size))) {
    throw FcsError(FcsErrc::Io, "read failed for " + path.string());
  }
  try {
    auto ds = parse_bytes(bytes, options);
    ds.source_path = path.string();
    return ds;
  } catch (const FcsError& e) {
    throw FcsError(e.code(), path.string() + ": " + e.detail(), e.offset());
  }
}

} // namespace flowcll::fcs
