#include "flowcll/fcs.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>

namespace flowcll::fcs {

namespace {

constexpr char kDelimiter = '/';
constexpr std::uint64_t kMaxHeaderOffset = 99'999'999;

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

void fail(const std::string& what) {
  throw FcsError(FcsErrc::InvalidDataset, what);
}

void check_token(std::string_view token, std::string_view what) {
  if (token.empty()) fail(std::string(what) + " is empty");
  if (token.front() == kDelimiter) {
    fail(std::string(what) + " '" + std::string(token) +
         "' starts with the delimiter");
  }
}

void validate(const FcsDataset& ds) {
  const auto& ev = ds.events;
  if (ds.params.empty()) fail("dataset has no parameters");
  if (ds.params.size() != ev.n_params) {
    fail("params (" + std::to_string(ds.params.size()) + ") != n_params (" +
         std::to_string(ev.n_params) + ")");
  }
  if (ev.values.size() != ev.n_events * ev.n_params) {
    fail("event matrix has " + std::to_string(ev.values.size()) +
         " values, expected n_events x n_params");
  }
  std::set<std::string> names;
  for (const auto& p : ds.params) {
    check_token(p.short_name, "$PnN");
    if (!names.insert(p.short_name).second) {
      fail("duplicate $PnN '" + p.short_name + "'");
    }
    if (p.stain) check_token(*p.stain, "$PnS");
    if (!(p.range >= 0) || !std::isfinite(p.range)) {
      fail("invalid range for '" + p.short_name + "'");
    }
  }
  for (const auto& [k, v] : ds.text.keywords) {
    if (is_structural_keyword(k)) continue;
    check_token(k, "keyword");
    check_token(v, "value of " + k);
  }
}

void append_escaped(std::string& out, std::string_view s) {
  for (char c : s) {
    out.push_back(c);
    if (c == kDelimiter) out.push_back(kDelimiter);
  }
}

std::string build_text(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string out(1, kDelimiter);
  for (const auto& [k, v] : kv) {
    append_escaped(out, k);
    out.push_back(kDelimiter);
    append_escaped(out, v);
    out.push_back(kDelimiter);
  }
  return out;
}

void put_offset(std::vector<std::uint8_t>& out, std::size_t at, std::uint64_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%8llu", static_cast<unsigned long long>(v));
  std::memcpy(out.data() + at, buf, 8);
}

} // namespace

bool is_structural_keyword(std::string_view keyword) {
  const auto k = upper(keyword);
  static const std::set<std::string, std::less<>> fixed = {
      "$BEGINANALYSIS", "$ENDANALYSIS", "$BEGINDATA", "$ENDDATA",
      "$BEGINSTEXT",    "$ENDSTEXT",    "$BYTEORD",   "$DATATYPE",
      "$MODE",          "$NEXTDATA",    "$PAR",       "$TOT"};
  if (fixed.count(k)) return true;
  // $PnB, $PnE, $PnN, $PnR, $PnS
  if (k.size() >= 4 && k[0] == '$' && k[1] == 'P') {
    std::size_t i = 2;
    while (i < k.size() && std::isdigit(static_cast<unsigned char>(k[i]))) ++i;
    if (i > 2 && i + 1 == k.size()) {
      const char s = k[i];
      return s == 'B' || s == 'E' || s == 'N' || s == 'R' || s == 'S';
    }
  }
  return false;
}

std::vector<std::uint8_t> encode(const FcsDataset& ds) {
  validate(ds);
  const auto& ev = ds.events;
  const std::uint64_t data_len =
      static_cast<std::uint64_t>(ev.values.size()) * sizeof(float);

  std::vector<std::pair<std::string, std::string>> fixed;
  fixed.emplace_back("$BYTEORD", "1,2,3,4");
  fixed.emplace_back("$DATATYPE", "F");
  fixed.emplace_back("$MODE", "L");
  fixed.emplace_back("$NEXTDATA", "0");
  fixed.emplace_back("$PAR", std::to_string(ev.n_params));
  fixed.emplace_back("$TOT", std::to_string(ev.n_events));
  fixed.emplace_back("$BEGINANALYSIS", "0");
  fixed.emplace_back("$ENDANALYSIS", "0");
  fixed.emplace_back("$BEGINSTEXT", "0");
  fixed.emplace_back("$ENDSTEXT", "0");
  for (std::size_t j = 0; j < ds.params.size(); ++j) {
    const auto& p = ds.params[j];
    const auto n = std::to_string(j + 1);
    fixed.emplace_back("$P" + n + "N", p.short_name);
    fixed.emplace_back("$P" + n + "B", "32");
    fixed.emplace_back("$P" + n + "R", format_number(p.range));
    fixed.emplace_back("$P" + n + "E", format_number(p.amplification.first) + "," +
                                           format_number(p.amplification.second));
    if (p.stain) fixed.emplace_back("$P" + n + "S", *p.stain);
  }
  for (const auto& [k, v] : ds.text.keywords) {
    if (!is_structural_keyword(k)) fixed.emplace_back(k, v);
  }

  // $BEGINDATA/$ENDDATA live inside TEXT, so their digit count feeds back
  // into where DATA starts. Iterate until the layout is stable.
  const std::uint64_t text_begin = kHeaderSize;
  std::uint64_t data_begin = 0, data_end = 0;
  std::string text;
  for (int iter = 0; iter < 8; ++iter) {
    auto kv = fixed;
    kv.emplace_back("$BEGINDATA", std::to_string(data_begin));
    kv.emplace_back("$ENDDATA", std::to_string(data_end));
    text = build_text(kv);
    const std::uint64_t nb = data_len ? text_begin + text.size() : 0;
    const std::uint64_t ne = data_len ? nb + data_len - 1 : 0;
    if (nb == data_begin && ne == data_end) break;
    data_begin = nb;
    data_end = ne;
  }
  const std::uint64_t text_end = text_begin + text.size() - 1;
  if (text_end > kMaxHeaderOffset) fail("TEXT segment too large for header");

  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + text.size() + data_len);
  out.resize(kHeaderSize, ' ');
  std::memcpy(out.data(), "FCS3.1", 6);
  put_offset(out, 10, text_begin);
  put_offset(out, 18, text_end);
  const bool fits = data_end <= kMaxHeaderOffset;
  put_offset(out, 26, fits ? data_begin : 0);
  put_offset(out, 34, fits ? data_end : 0);
  put_offset(out, 42, 0);
  put_offset(out, 50, 0);
  out.insert(out.end(), text.begin(), text.end());

  const auto data_at = out.size();
  out.resize(out.size() + data_len);
  if constexpr (std::endian::native == std::endian::little) {
    if (data_len) std::memcpy(out.data() + data_at, ev.values.data(), data_len);
  } else {
    auto* dst = out.data() + data_at;
    for (float v : ev.values) {
      std::uint8_t b[4];
      std::memcpy(b, &v, 4);
      for (int i = 3; i >= 0; --i) *dst++ = b[i];
    }
  }
  return out;
}

std::size_t write_file(const FcsDataset& dataset,
                       const std::filesystem::path& path) {
  const auto bytes = encode(dataset);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FcsError(FcsErrc::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw FcsError(FcsErrc::Io, "write failed for " + path.string());
  return bytes.size();
}

FcsDataset make_dataset(std::vector<ParameterInfo> params, EventMatrix events,
                        std::map<std::string, std::string> extra_keywords) {
  FcsDataset ds;
  ds.header.version = FcsVersion::Fcs31;
  for (std::size_t j = 0; j < params.size(); ++j) params[j].index = j + 1;
  ds.params = std::move(params);
  ds.events = std::move(events);

  auto& t = ds.text;
  t.delimiter = kDelimiter;
  for (auto& [k, v] : extra_keywords) t.set(k, v);
  t.set("$BYTEORD", "1,2,3,4");
  t.set("$DATATYPE", "F");
  t.set("$MODE", "L");
  t.set("$PAR", std::to_string(ds.params.size()));
  t.set("$TOT", std::to_string(ds.events.n_events));
  for (const auto& p : ds.params) {
    const auto n = std::to_string(p.index);
    t.set("$P" + n + "N", p.short_name);
    t.set("$P" + n + "B", "32");
    t.set("$P" + n + "R", format_number(p.range));
    t.set("$P" + n + "E", format_number(p.amplification.first) + "," +
                              format_number(p.amplification.second));
    if (p.stain) t.set("$P" + n + "S", *p.stain);
  }
  return ds;
}

} // namespace flowcll::fcs
