#pragma once

// Helpers shared by the test binaries. Nothing here calls into the code under
// test except where a test needs a fully valid object to start from.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "flowcll/fcs.hpp"
#include "flowcll/featurize.hpp"
#include "flowcll/models/training_set.hpp"

namespace testsupport {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("flowcll_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

/// Hand-assembled FCS image, built without the library writer.
struct RawFcs {
  std::string version = "FCS3.1";
  char delimiter = '/';
  std::vector<std::pair<std::string, std::string>> keywords;
  std::vector<std::uint8_t> data;
  /// Put the data offsets in the header (otherwise zeros there and only
  /// $BEGINDATA/$ENDDATA locate DATA).
  bool header_data_offsets = true;
  bool add_data_keywords = true;
};

inline std::string pad8(std::uint64_t v) {
  std::string s = std::to_string(v);
  return std::string(8 - s.size(), ' ') + s;
}

inline std::vector<std::uint8_t> build_raw(const RawFcs& raw) {
  auto escape = [&](const std::string& s) {
    std::string out;
    for (char c : s) {
      out += c;
      if (c == raw.delimiter) out += c;
    }
    return out;
  };
  // Zero-padded fixed-width offsets keep the TEXT length independent of them.
  auto fixed = [](std::uint64_t v) {
    std::string s = std::to_string(v);
    return std::string(12 - s.size(), '0') + s;
  };
  auto text_for = [&](std::uint64_t begin, std::uint64_t end) {
    std::string t(1, raw.delimiter);
    for (const auto& [k, v] : raw.keywords) {
      t += escape(k) + raw.delimiter + escape(v) + raw.delimiter;
    }
    if (raw.add_data_keywords) {
      t += std::string("$BEGINDATA") + raw.delimiter + fixed(begin) + raw.delimiter;
      t += std::string("$ENDDATA") + raw.delimiter + fixed(end) + raw.delimiter;
    }
    return t;
  };
  const std::size_t text_len = text_for(0, 0).size();
  const std::uint64_t text_begin = 58;
  const std::uint64_t text_end = text_begin + text_len - 1;
  const std::uint64_t data_begin = raw.data.empty() ? 0 : text_end + 1;
  const std::uint64_t data_end = raw.data.empty() ? 0 : data_begin + raw.data.size() - 1;
  const std::string text = text_for(data_begin, data_end);

  std::string header = raw.version + "    ";
  header += pad8(text_begin) + pad8(text_end);
  if (raw.header_data_offsets) {
    header += pad8(data_begin) + pad8(data_end);
  } else {
    header += pad8(0) + pad8(0);
  }
  header += pad8(0) + pad8(0);

  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), raw.data.begin(), raw.data.end());
  return out;
}

inline void put_le32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t float_bits(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  return u;
}

/// Random in-memory dataset with unique names; values span ordinary floats,
/// subnormals, signed zeros, infinities and NaN payloads when `specials`.
inline flowcll::fcs::FcsDataset random_dataset(std::mt19937_64& rng, std::size_t n_events,
                                               std::size_t n_params, bool specials) {
  using namespace flowcll::fcs;
  std::vector<ParameterInfo> params;
  for (std::size_t p = 0; p < n_params; ++p) {
    ParameterInfo info;
    info.index = p + 1;
    info.short_name = "P" + std::to_string(p + 1) + "-A";
    info.bits = 32;
    info.range = 262144;
    if (p % 2 == 0) info.stain = "CD" + std::to_string(p + 3) + " // x";
    params.push_back(std::move(info));
  }
  EventMatrix m;
  m.n_events = n_events;
  m.n_params = n_params;
  m.values.resize(n_events * n_params);
  std::uniform_real_distribution<float> u(-1e5f, 3e5f);
  std::uniform_int_distribution<std::uint32_t> bits;
  std::uniform_int_distribution<int> pick(0, 19);
  for (auto& v : m.values) {
    if (specials && pick(rng) == 0) {
      std::uint32_t b = bits(rng);  // arbitrary bit pattern, NaNs included
      std::memcpy(&v, &b, 4);
    } else {
      v = u(rng);
    }
  }
  return make_dataset(std::move(params), std::move(m));
}

/// Small labeled matrix backed by owned storage.
struct ToyData {
  std::vector<std::vector<float>> rows;
  std::vector<int> labels;

  flowcll::models::TrainingSet set() const {
    flowcll::models::TrainingSet s;
    for (const auto& r : rows) s.rows.emplace_back(r);
    s.labels = labels;
    s.n_features = rows.empty() ? 0 : rows.front().size();
    return s;
  }
};

/// Random data with both classes present. Values come from a small integer
/// grid when `coarse`, which produces many tied values and tied gains.
inline ToyData random_toy(std::mt19937_64& rng, std::size_t n, std::size_t d, bool coarse) {
  ToyData t;
  std::uniform_real_distribution<float> u(-3.0f, 3.0f);
  std::uniform_int_distribution<int> grid(0, 3);
  std::bernoulli_distribution coin(0.5);
  t.rows.assign(n, std::vector<float>(d));
  t.labels.resize(n);
  do {
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : t.rows[i]) v = coarse ? static_cast<float>(grid(rng)) : u(rng);
      t.labels[i] = coin(rng) ? 1 : 0;
    }
  } while (std::count(t.labels.begin(), t.labels.end(), 1) == 0 ||
           std::count(t.labels.begin(), t.labels.end(), 0) == 0);
  return t;
}

} // namespace testsupport
