#pragma once

// Reader and writer for Flow Cytometry Standard (FCS) list-mode files.
//
// A file is three segments addressed from a fixed 58-byte HEADER:
//   HEADER  "FCS3.1" + 4 spaces + six 8-char ASCII offsets (inclusive bytes)
//   TEXT    delimiter-separated keyword/value pairs
//   DATA    packed event x parameter matrix
// Reading accepts FCS 2.0, 3.0 and 3.1 with $DATATYPE I, F or D. Writing
// always emits FCS 3.1, $DATATYPE=F, little-endian, '/' delimiter.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace flowcll::fcs {

enum class FcsErrc {
  UnknownVersion,
  MalformedOffset,
  BadOffsets,
  Truncated,
  MissingRequiredKeyword,
  EmptyValue,
  UnterminatedSegment,
  InvalidKeywordValue,
  InvalidParameter,
  LengthMismatch,
  UnsupportedByteOrder,
  UnsupportedDatatype,
  UnsupportedMode,
  InvalidDataset,
  Io,
};

std::string_view to_string(FcsErrc code);

/// Every parse failure carries a code and, where known, the byte offset in
/// the file at which the problem was found.
class FcsError : public std::runtime_error {
 public:
  FcsError(FcsErrc code, const std::string& what,
           std::optional<std::uint64_t> offset = std::nullopt);

  FcsErrc code() const noexcept { return code_; }
  std::optional<std::uint64_t> offset() const noexcept { return offset_; }
  /// Message without the code prefix or offset suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  FcsErrc code_;
  std::optional<std::uint64_t> offset_;
  std::string detail_;
};

enum class FcsVersion { Fcs20, Fcs30, Fcs31 };

std::string_view to_string(FcsVersion v);

inline constexpr std::size_t kHeaderSize = 58;

struct FcsHeader {
  FcsVersion version = FcsVersion::Fcs31;
  std::uint64_t text_begin = 0;
  std::uint64_t text_end = 0;
  std::uint64_t data_begin = 0;
  std::uint64_t data_end = 0;
  std::uint64_t analysis_begin = 0;
  std::uint64_t analysis_end = 0;
};

/// Byte range with an inclusive end, matching FCS offset semantics.
struct ByteRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

/// Case-insensitive ordering so "$par" and "$PAR" address the same entry.
struct KeywordLess {
  bool operator()(std::string_view a, std::string_view b) const noexcept;
  using is_transparent = void;
};

struct TextSegment {
  char delimiter = '/';
  std::map<std::string, std::string, KeywordLess> keywords;

  const std::string* find(std::string_view keyword) const;
  /// Throws MissingRequiredKeyword when absent.
  const std::string& at(std::string_view keyword) const;
  void set(std::string keyword, std::string value);
};

struct ParameterInfo {
  std::size_t index = 0;  // 1-based
  std::string short_name;
  unsigned bits = 32;
  double range = 0;
  std::pair<double, double> amplification{0.0, 0.0};
  std::optional<std::string> stain;
};

/// Row-major event x parameter matrix.
struct EventMatrix {
  std::size_t n_events = 0;
  std::size_t n_params = 0;
  std::vector<float> values;

  float operator()(std::size_t event, std::size_t param) const {
    return values[event * n_params + param];
  }
};

struct FcsDataset {
  FcsHeader header;
  TextSegment text;
  std::vector<ParameterInfo> params;
  EventMatrix events;
  std::string source_path;

  /// Index into params/columns of the parameter with the given $PnN.
  std::optional<std::size_t> find_parameter(std::string_view short_name) const;
};

FcsHeader parse_header(std::span<const std::uint8_t> bytes);

/// Tokenizes a TEXT segment; the first byte of the range is the delimiter.
/// Performs no required-keyword validation (see validate_text).
TextSegment parse_text(std::span<const std::uint8_t> bytes, ByteRange range);

/// Checks the keywords every list-mode file must carry for the given version.
void validate_text(const TextSegment& text, FcsVersion version);

/// Builds the per-parameter table from $PnN/$PnB/$PnR/$PnE/$PnS.
std::vector<ParameterInfo> parse_parameters(const TextSegment& text,
                                            FcsVersion version);

/// Decodes a DATA segment. `data` spans exactly the segment bytes.
EventMatrix decode_data(std::span<const std::uint8_t> data,
                        const TextSegment& text,
                        std::span<const ParameterInfo> params);

struct ParseOptions {
  /// Stop after TEXT; the returned dataset has an empty event matrix.
  bool keywords_only = false;
};

FcsDataset parse_bytes(std::span<const std::uint8_t> bytes,
                       const ParseOptions& options = {});

FcsDataset parse_file(const std::filesystem::path& path,
                      const ParseOptions& options = {});

/// Serializes to an FCS 3.1 byte image. Validates the dataset first and
/// throws InvalidDataset before producing anything.
std::vector<std::uint8_t> encode(const FcsDataset& dataset);

/// Returns the number of bytes written.
std::size_t write_file(const FcsDataset& dataset,
                       const std::filesystem::path& path);

/// Smallest power of two >= range, minus one; saturates at all-ones.
std::uint64_t range_mask(double range);

/// Keywords regenerated by the writer; excluded when comparing keyword sets.
bool is_structural_keyword(std::string_view keyword);

/// Convenience constructor for in-memory datasets (synthetic data, tests).
FcsDataset make_dataset(std::vector<ParameterInfo> params, EventMatrix events,
                        std::map<std::string, std::string> extra_keywords = {});

} // namespace flowcll::fcs
