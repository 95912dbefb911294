#include "ccmt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ccmt/error.hpp"
#include "ccmt/random.hpp"

namespace ccmt {

namespace {

constexpr char kMagic[] = "CCMTEMB";
constexpr std::size_t kMagicLen = 7;
constexpr std::uint32_t kMaxWidth = 1u << 20;
constexpr std::uint32_t kMaxClasses = 1u << 20;
constexpr std::size_t kMaxLabelName = 1u << 16;

void encode_header(ByteWriter& w, const DatasetHeader& h) {
  w.bytes({kMagic, kMagicLen});
  w.u32(h.version);
  w.u16(static_cast<std::uint16_t>(kNumModalities));
  for (auto width : h.widths) w.u32(width);
  w.u32(h.num_classes);
  w.u64(h.sample_count);
  for (const auto& name : h.label_names) w.str(name);
}

void encode_record(ByteWriter& w, const SampleRecord& r) {
  w.u64(r.sample_id);
  w.u32(r.label);
  for (auto m : kAllModalities) {
    const auto& variants = r.variants(m);
    w.u16(static_cast<std::uint16_t>(variants.size()));
    for (const auto& v : variants) {
      w.u32(static_cast<std::uint32_t>(v.count()));
      w.u32(v.class_index ? static_cast<std::uint32_t>(*v.class_index) : kNoClassToken);
      for (double x : v.tokens.values()) w.f32(static_cast<float>(x));
    }
  }
}

DatasetHeader decode_header(ByteReader& r) {
  DatasetHeader h;
  char magic[kMagicLen];
  r.read({reinterpret_cast<std::uint8_t*>(magic), kMagicLen}, "magic");
  if (std::string_view(magic, kMagicLen) != std::string_view(kMagic, kMagicLen))
    r.fail_at("bad magic: not a CCMTEMB file", 0);
  auto at = r.offset();
  h.version = r.u32();
  if (h.version != kDatasetFormatVersion)
    r.fail_at("unsupported CCMTEMB version " + std::to_string(h.version), at);
  at = r.offset();
  const auto nmod = r.u16();
  if (nmod != kNumModalities)
    r.fail_at("expected 3 modalities, header declares " + std::to_string(nmod), at);
  for (auto& width : h.widths) {
    at = r.offset();
    width = r.u32();
    if (width == 0 || width > kMaxWidth)
      r.fail_at("modality width " + std::to_string(width) + " out of range", at);
  }
  at = r.offset();
  h.num_classes = r.u32();
  if (h.num_classes == 0 || h.num_classes > kMaxClasses)
    r.fail_at("num_classes " + std::to_string(h.num_classes) + " out of range", at);
  h.sample_count = r.u64();
  // Each label name needs at least its 4-byte length prefix.
  r.require(4ull * h.num_classes, "label names");
  h.label_names.reserve(h.num_classes);
  for (std::uint32_t c = 0; c < h.num_classes; ++c) h.label_names.push_back(r.str(kMaxLabelName));
  return h;
}

SampleRecord decode_record(ByteReader& r, const DatasetHeader& h) {
  SampleRecord rec;
  rec.sample_id = r.u64();
  const auto label_at = r.offset();
  rec.label = r.u32();
  if (rec.label >= h.num_classes)
    r.fail_at("label " + std::to_string(rec.label) + " >= num_classes " +
                  std::to_string(h.num_classes),
              label_at);
  for (auto m : kAllModalities) {
    const std::size_t width = h.widths[index_of(m)];
    auto at = r.offset();
    const auto nvar = r.u16();
    if (nvar == 0) r.fail_at(to_string(m) + ": variant_count must be >= 1", at);
    auto& variants = rec.modalities[index_of(m)];
    variants.reserve(nvar);
    for (std::uint16_t vi = 0; vi < nvar; ++vi) {
      at = r.offset();
      const auto count = r.u32();
      if (count == 0) r.fail_at(to_string(m) + ": token_count must be >= 1", at);
      at = r.offset();
      const auto cls = r.u32();
      ModalityTokens t;
      t.modality = m;
      t.encoder_tag = "variant" + std::to_string(vi);
      if (is_text(m)) {
        if (cls == kNoClassToken || cls >= count)
          r.fail_at(to_string(m) + ": class index " + std::to_string(cls) + " invalid for " +
                        std::to_string(count) + " tokens",
                    at);
        t.class_index = cls;
      } else if (cls != kNoClassToken) {
        r.fail_at("audio: class index must be the none sentinel", at);
      }
      const std::uint64_t n = static_cast<std::uint64_t>(count) * width;
      r.require(4 * n, "token values");
      std::vector<double> values(n);
      for (auto& x : values) x = static_cast<double>(r.f32());
      t.tokens = Tensor({count, width}, std::move(values));
      variants.push_back(std::move(t));
    }
  }
  return rec;
}

nlohmann::json header_to_json(const DatasetHeader& h) {
  return {{"magic", "CCMTEMB"},
          {"version", h.version},
          {"num_modalities", kNumModalities},
          {"widths", h.widths},
          {"num_classes", h.num_classes},
          {"sample_count", h.sample_count},
          {"label_names", h.label_names}};
}

nlohmann::json record_to_json(const SampleRecord& r) {
  nlohmann::json mods = nlohmann::json::array();
  for (auto m : kAllModalities) {
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& v : r.variants(m)) {
      nlohmann::json values = nlohmann::json::array();
      for (double x : v.tokens.values()) values.push_back(static_cast<double>(static_cast<float>(x)));
      vars.push_back({{"token_count", v.count()},
                      {"class_index", v.class_index ? static_cast<std::uint32_t>(*v.class_index)
                                                    : kNoClassToken},
                      {"values", std::move(values)}});
    }
    mods.push_back({{"modality", to_string(m)}, {"variants", std::move(vars)}});
  }
  return {{"sample_id", r.sample_id}, {"label", r.label}, {"modalities", std::move(mods)}};
}

DatasetHeader header_from_json(const nlohmann::json& j) {
  DatasetHeader h;
  if (j.at("magic").get<std::string>() != "CCMTEMB") throw ValidationError("bad magic");
  h.version = j.at("version").get<std::uint32_t>();
  if (h.version != kDatasetFormatVersion) throw ValidationError("unsupported version");
  if (j.at("num_modalities").get<std::uint32_t>() != kNumModalities)
    throw ValidationError("expected 3 modalities");
  h.widths = j.at("widths").get<std::array<std::uint32_t, kNumModalities>>();
  h.num_classes = j.at("num_classes").get<std::uint32_t>();
  h.sample_count = j.at("sample_count").get<std::uint64_t>();
  h.label_names = j.at("label_names").get<std::vector<std::string>>();
  h.validate();
  return h;
}

SampleRecord record_from_json(const nlohmann::json& j, const DatasetHeader& h) {
  SampleRecord r;
  r.sample_id = j.at("sample_id").get<std::uint64_t>();
  r.label = j.at("label").get<std::uint32_t>();
  const auto& mods = j.at("modalities");
  if (!mods.is_array() || mods.size() != kNumModalities)
    throw ValidationError("record must list 3 modalities");
  for (auto m : kAllModalities) {
    const auto& jm = mods.at(index_of(m));
    if (jm.at("modality").get<std::string>() != to_string(m))
      throw ValidationError("modality out of order: expected " + to_string(m));
    for (const auto& jv : jm.at("variants")) {
      ModalityTokens t;
      t.modality = m;
      t.encoder_tag = "variant" + std::to_string(r.modalities[index_of(m)].size());
      const auto count = jv.at("token_count").get<std::uint32_t>();
      const auto cls = jv.at("class_index").get<std::uint32_t>();
      if (cls != kNoClassToken) t.class_index = cls;
      auto values = jv.at("values").get<std::vector<double>>();
      const std::size_t width = h.widths[index_of(m)];
      if (count == 0 || values.size() != static_cast<std::size_t>(count) * width)
        throw ValidationError(to_string(m) + ": value count does not match token_count x width");
      for (auto& x : values) x = static_cast<double>(static_cast<float>(x));
      t.tokens = Tensor({count, width}, std::move(values));
      r.modalities[index_of(m)].push_back(std::move(t));
    }
  }
  validate_record(r, h);
  return r;
}

Dataset read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  Dataset ds;
  std::string line;
  std::uint64_t offset = 0;
  std::uint64_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    const auto line_at = offset;
    offset += line.size() + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!have_header) {
        ds.header = header_from_json(j);
        have_header = true;
      } else {
        ds.records.push_back(record_from_json(j, ds.header));
      }
    } catch (const nlohmann::json::exception& e) {
      if (!have_header) throw ParseError(std::string("bad JSON-lines header: ") + e.what(), line_at);
      throw ParseError(std::string("bad JSON-lines record: ") + e.what(), line_at, ds.records.size());
    } catch (const ValidationError& e) {
      if (!have_header) throw ParseError(std::string("bad JSON-lines header: ") + e.what(), line_at);
      throw ParseError(std::string("bad JSON-lines record: ") + e.what(), line_at, ds.records.size());
    }
  }
  if (!have_header) throw ParseError("empty JSON-lines dataset", 0);
  if (ds.records.size() != ds.header.sample_count)
    throw ParseError("header declares " + std::to_string(ds.header.sample_count) + " samples, found " +
                         std::to_string(ds.records.size()),
                     offset);
  return ds;
}

void write_jsonl(std::span<const SampleRecord> records, const DatasetHeader& header,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << header_to_json(header).dump() << '\n';
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

void DatasetHeader::validate() const {
  if (version != kDatasetFormatVersion)
    throw ValidationError("dataset header: unsupported version " + std::to_string(version));
  for (std::size_t m = 0; m < kNumModalities; ++m)
    if (widths[m] == 0 || widths[m] > kMaxWidth)
      throw ValidationError("dataset header: width of " + to_string(kAllModalities[m]) + " out of range");
  if (num_classes == 0 || num_classes > kMaxClasses)
    throw ValidationError("dataset header: num_classes out of range");
  if (label_names.size() != num_classes)
    throw ValidationError("dataset header: expected " + std::to_string(num_classes) +
                          " label names, got " + std::to_string(label_names.size()));
}

const SampleRecord* Dataset::find(std::uint64_t sample_id) const {
  for (const auto& r : records)
    if (r.sample_id == sample_id) return &r;
  return nullptr;
}

std::vector<std::uint64_t> Dataset::ids() const {
  std::vector<std::uint64_t> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.sample_id);
  return out;
}

void validate_record(const SampleRecord& r, const DatasetHeader& h) {
  const std::string where = "sample " + std::to_string(r.sample_id) + ": ";
  if (r.label >= h.num_classes)
    throw ValidationError(where + "label " + std::to_string(r.label) + " >= num_classes");
  for (auto m : kAllModalities) {
    const auto& variants = r.variants(m);
    if (variants.empty() || variants.size() > 0xFFFF)
      throw ValidationError(where + to_string(m) + " needs 1..65535 variants");
    for (const auto& v : variants) {
      if (v.modality != m) throw ValidationError(where + "variant tagged with the wrong modality");
      v.validate();
      if (v.width() != h.widths[index_of(m)])
        throw ValidationError(where + to_string(m) + " width " + std::to_string(v.width()) +
                              " differs from header width " + std::to_string(h.widths[index_of(m)]));
      if (v.count() >= kNoClassToken) throw ValidationError(where + "too many tokens");
    }
  }
}

DatasetWriter::DatasetWriter(const std::filesystem::path& path, DatasetHeader header)
    : path_(path), header_(std::move(header)) {
  header_.validate();
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
  ByteWriter w;
  encode_header(w, header_);
  emit(w);
}

void DatasetWriter::emit(const ByteWriter& w) {
  const auto& b = w.buffer();
  out_.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out_) throw IoError("write failed for '" + path_.string() + "'");
  crc_ = crc32(b, crc_);
}

void DatasetWriter::append(const SampleRecord& record) {
  if (finished_) throw ContractError("DatasetWriter: append after finish");
  if (written_ >= header_.sample_count)
    throw ValidationError("DatasetWriter: more records than header sample_count");
  validate_record(record, header_);
  ByteWriter w;
  encode_record(w, record);
  emit(w);
  ++written_;
}

void DatasetWriter::finish() {
  if (finished_) return;
  if (written_ != header_.sample_count)
    throw ValidationError("DatasetWriter: header declares " + std::to_string(header_.sample_count) +
                          " samples, wrote " + std::to_string(written_));
  ByteWriter w;
  w.u32(crc_);
  const auto& b = w.buffer();
  out_.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  out_.close();
  if (!out_) throw IoError("write failed for '" + path_.string() + "'");
  finished_ = true;
}

DatasetReader::DatasetReader(const std::filesystem::path& path) {
  in_.open(path, std::ios::binary);
  if (!in_) throw IoError("cannot open dataset '" + path.string() + "'");
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat dataset '" + path.string() + "'");
  reader_.emplace(in_, size);
  header_ = decode_header(*reader_);
}

std::optional<SampleRecord> DatasetReader::next() {
  if (done_) return std::nullopt;
  auto& r = *reader_;
  if (index_ < header_.sample_count) {
    r.set_record(index_);
    auto rec = decode_record(r, header_);
    r.set_record(std::nullopt);
    ++index_;
    return rec;
  }
  const auto expected = r.crc();
  const auto crc_at = r.offset();
  const auto stored = r.u32();
  if (stored != expected) r.fail_at("checksum mismatch", crc_at);
  if (r.remaining() != 0) r.fail("trailing bytes after checksum");
  done_ = true;
  return std::nullopt;
}

void write_dataset(std::span<const SampleRecord> records, const DatasetHeader& header,
                   const std::filesystem::path& path, DatasetFormat format) {
  if (header.sample_count != records.size())
    throw ValidationError("write_dataset: header sample_count " + std::to_string(header.sample_count) +
                          " but " + std::to_string(records.size()) + " records given");
  if (format == DatasetFormat::JsonLines) {
    header.validate();
    for (const auto& r : records) validate_record(r, header);
    write_jsonl(records, header, path);
    return;
  }
  DatasetWriter w(path, header);
  for (const auto& r : records) w.append(r);
  w.finish();
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path, DatasetFormat format) {
  write_dataset(dataset.records, dataset.header, path, format);
}

Dataset read_dataset(const std::filesystem::path& path, DatasetFormat format) {
  if (format == DatasetFormat::JsonLines) return read_jsonl(path);
  DatasetReader reader(path);
  Dataset ds;
  ds.header = reader.header();
  while (auto rec = reader.next()) ds.records.push_back(std::move(*rec));
  return ds;
}

void DatasetSplit::validate(std::span<const std::uint64_t> ids) const {
  const std::unordered_set<std::uint64_t> all(ids.begin(), ids.end());
  std::unordered_map<std::uint64_t, const char*> owner;
  auto check = [&](const std::vector<std::uint64_t>& part, const char* name) {
    for (auto id : part) {
      if (!all.count(id))
        throw ValidationError(std::string("split '") + name + "' references unknown sample " +
                              std::to_string(id));
      auto [it, inserted] = owner.emplace(id, name);
      if (!inserted)
        throw ValidationError("sample " + std::to_string(id) + " appears in both '" + it->second +
                              "' and '" + name + "'");
    }
  };
  check(train, "train");
  check(dev, "dev");
  check(test, "test");
}

DatasetSplit make_split(std::span<const std::uint64_t> ids, std::size_t n_train, std::size_t n_dev,
                        std::size_t n_test, std::uint64_t seed) {
  if (n_train + n_dev + n_test > ids.size())
    throw ValidationError("make_split: requested " + std::to_string(n_train + n_dev + n_test) +
                          " samples from " + std::to_string(ids.size()));
  std::vector<std::uint64_t> order(ids.begin(), ids.end());
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  DatasetSplit s;
  s.seed = seed;
  auto it = order.begin();
  s.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  it += static_cast<std::ptrdiff_t>(n_train);
  s.dev.assign(it, it + static_cast<std::ptrdiff_t>(n_dev));
  it += static_cast<std::ptrdiff_t>(n_dev);
  s.test.assign(it, it + static_cast<std::ptrdiff_t>(n_test));
  s.validate(ids);
  return s;
}

DatasetSplit make_split_fractions(std::span<const std::uint64_t> ids, double dev_fraction,
                                  double test_fraction, std::uint64_t seed) {
  if (dev_fraction < 0 || test_fraction < 0 || dev_fraction + test_fraction >= 1.0)
    throw ValidationError("make_split: fractions must be non-negative and leave room for train");
  const auto n = ids.size();
  const auto n_dev = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  return make_split(ids, n - n_dev - n_test, n_dev, n_test, seed);
}

std::vector<const SampleRecord*> select_records(const Dataset& dataset,
                                                std::span<const std::uint64_t> ids) {
  std::unordered_map<std::uint64_t, const SampleRecord*> by_id;
  for (const auto& r : dataset.records) by_id.emplace(r.sample_id, &r);
  std::vector<const SampleRecord*> out;
  out.reserve(ids.size());
  for (auto id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("sample " + std::to_string(id) + " not in dataset");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace ccmt
