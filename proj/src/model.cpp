#include "ccmt/model.hpp"

#include <cmath>
#include <fstream>

#include "ccmt/binary_io.hpp"
#include "ccmt/error.hpp"
#include "ccmt/random.hpp"

namespace ccmt {

namespace {

constexpr char kModelMagic[] = "CCMTMDL";
constexpr std::size_t kMagicLen = 7;

void require_positive(std::size_t v, const char* field) {
  if (v == 0) throw ValidationError(std::string("config field '") + field + "' must be positive");
}

std::string activation_name(Activation a) { return a == Activation::Gelu ? "gelu" : "relu"; }

Activation parse_activation(const std::string& s) {
  if (s == "gelu") return Activation::Gelu;
  if (s == "relu") return Activation::Relu;
  throw ValidationError("config field 'activation': unknown value '" + s + "'");
}

BlockDims block_dims(const CCMTConfig& c) { return {c.d, c.d_head, c.heads, c.d_ff}; }

bool modality_used(const CCMTConfig& c, Modality m) {
  return !(c.pair_mode && m == c.query_modality);
}

}  // namespace

CCMTConfig CCMTConfig::resolved() const {
  CCMTConfig c = *this;
  if (c.d_ff == 0) c.d_ff = 4 * c.d;
  if (c.mlp_hidden == 0) c.mlp_hidden = c.d;
  for (auto& w : c.input_widths)
    if (w == 0) w = c.d;
  return c;
}

void CCMTConfig::validate() const {
  require_positive(k, "k");
  require_positive(d, "d");
  require_positive(d_head, "d_head");
  require_positive(heads, "heads");
  if (!pair_mode) require_positive(l1, "l1");
  require_positive(l2, "l2");
  require_positive(num_classes, "num_classes");
  if (!is_text(query_modality))
    throw ValidationError("config field 'query_modality' must name a text modality");
  if (!(init_std > 0.0) || !std::isfinite(init_std))
    throw ValidationError("config field 'init_std' must be positive and finite");
}

nlohmann::json to_json(const CCMTConfig& c) {
  nlohmann::json j;
  j["k"] = c.k;
  j["d"] = c.d;
  j["d_head"] = c.d_head;
  j["heads"] = c.heads;
  j["l1"] = c.l1;
  j["l2"] = c.l2;
  j["d_ff"] = c.d_ff;
  j["mlp_hidden"] = c.mlp_hidden;
  j["num_classes"] = c.num_classes;
  j["residual_mode"] = to_string(c.residual_mode);
  j["input_projection"] = c.input_projection;
  j["query_modality"] = to_string(c.query_modality);
  j["input_widths"] = c.input_widths;
  j["pair_mode"] = c.pair_mode;
  j["activation"] = activation_name(c.activation);
  j["init_std"] = c.init_std;
  return j;
}

CCMTConfig ccmt_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("CCMT config must be a JSON object");
  CCMTConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "k") c.k = v.get<std::size_t>();
      else if (key == "d") c.d = v.get<std::size_t>();
      else if (key == "d_head") c.d_head = v.get<std::size_t>();
      else if (key == "heads") c.heads = v.get<std::size_t>();
      else if (key == "l1") c.l1 = v.get<std::size_t>();
      else if (key == "l2") c.l2 = v.get<std::size_t>();
      else if (key == "d_ff") c.d_ff = v.get<std::size_t>();
      else if (key == "mlp_hidden") c.mlp_hidden = v.get<std::size_t>();
      else if (key == "num_classes") c.num_classes = v.get<std::size_t>();
      else if (key == "residual_mode") c.residual_mode = parse_residual_mode(v.get<std::string>());
      else if (key == "input_projection") c.input_projection = v.get<bool>();
      else if (key == "query_modality") c.query_modality = parse_modality(v.get<std::string>());
      else if (key == "input_widths") c.input_widths = v.get<std::array<std::size_t, kNumModalities>>();
      else if (key == "pair_mode") c.pair_mode = v.get<bool>();
      else if (key == "activation") c.activation = parse_activation(v.get<std::string>());
      else if (key == "init_std") c.init_std = v.get<double>();
      else throw ValidationError("unknown CCMT config field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("CCMT config: ") + e.what());
  }
  return c;
}

std::size_t parameter_count(const CCMTConfig& config) {
  const CCMTConfig c = config.resolved();
  std::size_t n = 0;
  for (auto m : kAllModalities) {
    if (!modality_used(c, m)) continue;
    n += c.k * c.d;
    const auto w = c.input_widths[index_of(m)];
    if (w != c.d) n += w * c.d + c.d;
    if (c.input_projection) n += c.d * c.d + c.d;
  }
  const std::size_t blocks = (c.pair_mode ? 0 : c.l1) + c.l2;
  n += blocks * block_parameter_count(block_dims(c));
  n += mlp_head_parameter_count(c.d, c.mlp_hidden, c.num_classes);
  return n;
}

CCMTModel::CCMTModel(const CCMTConfig& config, std::uint64_t seed) : config_(config.resolved()) {
  config_.validate();
  const auto& c = config_;
  Rng rng(seed);
  for (auto m : kAllModalities)
    if (modality_used(c, m))
      positional_[index_of(m)] =
          params_.add("pos." + to_string(m), Tensor::normal({c.k, c.d}, c.init_std, rng));
  for (auto m : kAllModalities) {
    const auto w = c.input_widths[index_of(m)];
    if (modality_used(c, m) && w != c.d)
      adapter_[index_of(m)] = make_linear(params_, "adapter." + to_string(m), w, c.d, rng, c.init_std);
  }
  if (c.input_projection)
    for (auto m : kAllModalities)
      if (modality_used(c, m))
        input_proj_[index_of(m)] =
            make_linear(params_, "input_proj." + to_string(m), c.d, c.d, rng, c.init_std);
  const auto dims = block_dims(c);
  if (!c.pair_mode)
    for (std::size_t l = 0; l < c.l1; ++l)
      block1_.push_back(make_block_params(params_, "block1." + std::to_string(l), dims, rng,
                                          c.init_std, c.activation));
  for (std::size_t l = 0; l < c.l2; ++l)
    block2_.push_back(make_block_params(params_, "block2." + std::to_string(l), dims, rng,
                                        c.init_std, c.activation));
  head_ = make_mlp_head(params_, "head", c.d, c.mlp_hidden, c.num_classes, rng, c.init_std,
                        c.activation);
}

Tensor CCMTModel::prepare(const UniformTokenSet& sample, Modality m) const {
  const Tensor& x = sample[m];
  const auto w = config_.input_widths[index_of(m)];
  if (x.ndim() != 2 || x.rows() != config_.k || x.cols() != w)
    throw DimensionError("ccmt forward: " + to_string(m) + " tokens " + shape_to_string(x.shape()) +
                         " expected [" + std::to_string(config_.k) + "x" + std::to_string(w) + "]");
  Tensor t = x;
  if (adapter_[index_of(m)]) t = (*adapter_[index_of(m)])(t);
  if (input_proj_[index_of(m)]) t = (*input_proj_[index_of(m)])(t);
  return add(t, *positional_[index_of(m)]);
}

ForwardTrace CCMTModel::forward_trace(const UniformTokenSet& sample) const {
  const auto mode = config_.residual_mode;
  ForwardTrace tr;
  Tensor stream = prepare(sample, config_.kv_modality());
  if (!config_.pair_mode) {
    const Tensor queries = prepare(sample, config_.query_modality);
    for (const auto& block : block1_) stream = ccmt_block_forward(queries, stream, block, mode).output;
  }
  tr.text_fused = stream;
  const Tensor audio = prepare(sample, Modality::Audio);
  for (const auto& block : block2_) stream = ccmt_block_forward(audio, stream, block, mode).output;
  tr.final_stream = stream;
  tr.class_embedding = row(stream, 0);
  tr.logits = head_(tr.class_embedding);
  return tr;
}

Tensor CCMTModel::forward(const UniformTokenSet& sample) const { return forward_trace(sample).logits; }

Tensor CCMTModel::head_logits(const Tensor& final_stream) const { return head_(row(final_stream, 0)); }

std::unique_ptr<CCMTModel> build_model(const CCMTConfig& config, std::uint64_t seed) {
  return std::make_unique<CCMTModel>(config, seed);
}

std::vector<std::uint8_t> serialize_model(const CCMTModel& model) {
  ByteWriter w;
  w.bytes({kModelMagic, kMagicLen});
  w.u32(kModelFormatVersion);
  w.str(to_json(model.config()).dump());
  const auto items = model.parameters().items();
  w.u32(static_cast<std::uint32_t>(items.size()));
  for (const auto& p : items) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor.ndim()));
    for (auto dim : p.tensor.shape()) w.u32(static_cast<std::uint32_t>(dim));
    for (double v : p.tensor.values()) w.f64(v);
  }
  w.u32(crc32(w.buffer()));
  return std::move(w.buffer());
}

void save_model(const CCMTModel& model, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_model(model));
}

std::unique_ptr<CCMTModel> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path.string() + "'");
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat model file '" + path.string() + "'");
  ByteReader r(in, size);

  char magic[kMagicLen];
  r.read({reinterpret_cast<std::uint8_t*>(magic), kMagicLen}, "magic");
  if (std::string_view(magic, kMagicLen) != std::string_view(kModelMagic, kMagicLen))
    r.fail_at("bad magic: not a CCMT model file", 0);
  const auto version_at = r.offset();
  const auto version = r.u32();
  if (version != kModelFormatVersion)
    r.fail_at("unsupported model format version " + std::to_string(version), version_at);

  const auto config_at = r.offset();
  CCMTConfig config;
  try {
    config = ccmt_config_from_json(nlohmann::json::parse(r.str(1 << 20)));
  } catch (const nlohmann::json::exception& e) {
    r.fail_at(std::string("invalid config block: ") + e.what(), config_at);
  } catch (const ValidationError& e) {
    r.fail_at(std::string("invalid config block: ") + e.what(), config_at);
  }
  auto model = build_model(config, 0);

  const auto count_at = r.offset();
  const auto items = model->parameters().items();
  const auto count = r.u32();
  if (count != items.size())
    r.fail_at("parameter table lists " + std::to_string(count) + " entries, config implies " +
                  std::to_string(items.size()),
              count_at);
  for (auto& p : items) {
    const auto entry_at = r.offset();
    const auto name = r.str(4096);
    if (name != p.name) r.fail_at("expected parameter '" + p.name + "', found '" + name + "'", entry_at);
    const auto ndim = r.u32();
    if (ndim != p.tensor.ndim()) r.fail_at("rank mismatch for '" + name + "'", entry_at);
    for (std::size_t i = 0; i < ndim; ++i)
      if (r.u32() != p.tensor.shape()[i]) r.fail_at("shape mismatch for '" + name + "'", entry_at);
    auto dst = p.tensor.mutable_values();
    r.require(8 * dst.size(), "parameter values");
    for (auto& v : dst) v = r.f64();
  }
  const auto expected = r.crc();
  const auto crc_at = r.offset();
  const auto stored = r.u32();
  if (stored != expected) r.fail_at("checksum mismatch", crc_at);
  if (r.remaining() != 0) r.fail("trailing bytes after checksum");
  return model;
}

}  // namespace ccmt
