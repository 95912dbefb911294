#pragma once

// CCMTEMB: the embedding dataset container.
//
// Binary layout, little-endian throughout:
//   header   "CCMTEMB" | u32 version (=1) | u16 num_modalities (=3)
//            | u32 width[3] | u32 num_classes | u64 sample_count
//            | num_classes x (u32 length + UTF-8 label name)
//   record   u64 sample_id | u32 label
//            | per modality: u16 variant_count (>= 1)
//              | per variant: u32 token_count (>= 1) | u32 class_index
//                (0xFFFFFFFF = none) | f32 values[token_count * width]
//   trailer  u32 CRC32 of every preceding byte
//
// Modalities appear in the order text_original, text_translated, audio. Text
// variants carry a class index; audio variants carry the sentinel.
//
// The JSON-lines debug form holds the same fields: line 1 is the header
// object, then one record object per line, floats in base 10.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccmt/binary_io.hpp"
#include "ccmt/tokens.hpp"

namespace ccmt {

inline constexpr std::uint32_t kDatasetFormatVersion = 1;
inline constexpr std::uint32_t kNoClassToken = 0xFFFFFFFFu;

struct DatasetHeader {
  std::uint32_t version = kDatasetFormatVersion;
  std::array<std::uint32_t, kNumModalities> widths{0, 0, 0};
  std::uint32_t num_classes = 0;
  std::uint64_t sample_count = 0;
  std::vector<std::string> label_names;  // one per class

  void validate() const;
};

struct Dataset {
  DatasetHeader header;
  std::vector<SampleRecord> records;

  const SampleRecord* find(std::uint64_t sample_id) const;
  std::vector<std::uint64_t> ids() const;
};

enum class DatasetFormat { Binary, JsonLines };

// Checks one record against a header; throws ValidationError.
void validate_record(const SampleRecord& record, const DatasetHeader& header);

// Streams records to disk. finish() writes the checksum and verifies the
// record count matches header.sample_count.
class DatasetWriter {
 public:
  DatasetWriter(const std::filesystem::path& path, DatasetHeader header);
  void append(const SampleRecord& record);
  void finish();

 private:
  void emit(const ByteWriter& w);

  std::filesystem::path path_;
  DatasetHeader header_;
  std::ofstream out_;
  std::uint32_t crc_ = 0;
  std::uint64_t written_ = 0;
  bool finished_ = false;
};

// Streams records from disk, one at a time. The checksum is verified when the
// last record has been read (next() returns nullopt only after it passes).
class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path);
  const DatasetHeader& header() const { return header_; }
  std::optional<SampleRecord> next();

 private:
  std::ifstream in_;
  std::optional<ByteReader> reader_;
  DatasetHeader header_;
  std::uint64_t index_ = 0;
  bool done_ = false;
};

void write_dataset(std::span<const SampleRecord> records, const DatasetHeader& header,
                   const std::filesystem::path& path,
                   DatasetFormat format = DatasetFormat::Binary);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path,
                   DatasetFormat format = DatasetFormat::Binary);
// Throws ParseError (with byte offset, and record index inside records) on
// malformed content, IoError when the file cannot be opened.
Dataset read_dataset(const std::filesystem::path& path, DatasetFormat format = DatasetFormat::Binary);

// Disjoint named subsets of a dataset's sample ids.
struct DatasetSplit {
  std::vector<std::uint64_t> train;
  std::vector<std::uint64_t> dev;
  std::vector<std::uint64_t> test;
  std::uint64_t seed = 0;

  // Throws ValidationError unless subsets are pairwise disjoint and drawn
  // from `ids`.
  void validate(std::span<const std::uint64_t> ids) const;
};

// Seeded shuffle of ids, then the first n_train go to train, the next n_dev to
// dev and the next n_test to test.
DatasetSplit make_split(std::span<const std::uint64_t> ids, std::size_t n_train, std::size_t n_dev,
                        std::size_t n_test, std::uint64_t seed);
// Fractions of the total for dev and test; train takes the rest.
DatasetSplit make_split_fractions(std::span<const std::uint64_t> ids, double dev_fraction,
                                  double test_fraction, std::uint64_t seed);

// Subset of records in the order of `ids`.
std::vector<const SampleRecord*> select_records(const Dataset& dataset,
                                                std::span<const std::uint64_t> ids);

}  // namespace ccmt
