#pragma once

// The cascaded cross-modal transformer.
//
// Pipeline for one sample (three k x d token matrices):
//   1. optional adapter (native width d_m != d) and optional input projection
//   2. add the modality's learned positional embedding
//   3. L1 text-fusion blocks: queries from the query text modality, keys and
//      values from the other text modality; the key/value stream is carried
//      and updated layer by layer and ends as T_c
//   4. L2 audio-fusion blocks: queries from the audio tokens, keys and values
//      from the stream starting at T_c; ends as T_o
//   5. logits = MLP(T_o row 0)
//
// Parameter count (see parameter_count()):
//   P = E * k * d                                   positional embeddings
//     + sum over modalities with d_m != d of (d_m * d + d)   adapters
//     + [input_projection] E * (d * d + d)
//     + (L1' + L2) * B
//     + d * h + h + h * C + C                       head, h = mlp_hidden
// where B = 3 * heads * d * d_h + heads * d_h * d + 4 * d + 2 * d * d_ff + d_ff + d,
// E = 3 and L1' = L1, or E = 2 and L1' = 0 in pair mode.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccmt/attention.hpp"
#include "ccmt/classifier.hpp"
#include "ccmt/layers.hpp"

namespace ccmt {

struct CCMTConfig {
  std::size_t k = 100;
  std::size_t d = 512;
  std::size_t d_head = 512;
  std::size_t heads = 8;
  std::size_t l1 = 8;
  std::size_t l2 = 8;
  std::size_t d_ff = 0;        // 0 -> 4 * d
  std::size_t mlp_hidden = 0;  // 0 -> d
  std::size_t num_classes = 2;
  ResidualMode residual_mode = ResidualMode::KvResidual;
  bool input_projection = false;
  // Text modality that supplies block-1 queries; the other one supplies keys
  // and values. The original language is the more informative one, so the
  // translation queries it.
  Modality query_modality = Modality::TextTranslated;
  // Native encoder widths per modality; 0 -> d. A width != d gets an adapter.
  std::array<std::size_t, kNumModalities> input_widths{0, 0, 0};
  // Skip block 1: the key/value text modality goes straight to block 2.
  bool pair_mode = false;
  Activation activation = Activation::Gelu;
  double init_std = 0.02;

  // Copy with every 0 default filled in.
  CCMTConfig resolved() const;
  // Throws ValidationError naming the first invalid field.
  void validate() const;

  Modality kv_modality() const {
    return query_modality == Modality::TextTranslated ? Modality::TextOriginal
                                                      : Modality::TextTranslated;
  }
};

nlohmann::json to_json(const CCMTConfig& c);
CCMTConfig ccmt_config_from_json(const nlohmann::json& j);

// Closed-form parameter count of build_model(config).
std::size_t parameter_count(const CCMTConfig& config);

struct ForwardTrace {
  Tensor logits;           // [num_classes]
  Tensor text_fused;       // T_c
  Tensor final_stream;     // T_o
  Tensor class_embedding;  // T_o row 0, [1 x d]
};

class CCMTModel final : public Classifier {
 public:
  CCMTModel(const CCMTConfig& config, std::uint64_t seed);

  Tensor forward(const UniformTokenSet& sample) const override;
  ForwardTrace forward_trace(const UniformTokenSet& sample) const;
  // Head applied to row 0 of a final stream.
  Tensor head_logits(const Tensor& final_stream) const;

  ParameterSet& parameters() override { return params_; }
  const ParameterSet& parameters() const override { return params_; }
  std::size_t num_classes() const override { return config_.num_classes; }
  std::size_t tokens_per_modality() const override { return config_.k; }
  std::string kind() const override { return "ccmt"; }

  const CCMTConfig& config() const { return config_; }
  const std::vector<CrossAttentionParams>& text_blocks() const { return block1_; }
  const std::vector<CrossAttentionParams>& audio_blocks() const { return block2_; }

 private:
  Tensor prepare(const UniformTokenSet& sample, Modality m) const;

  CCMTConfig config_;
  ParameterSet params_;
  std::array<std::optional<Tensor>, kNumModalities> positional_;
  std::array<std::optional<Linear>, kNumModalities> adapter_;
  std::array<std::optional<Linear>, kNumModalities> input_proj_;
  std::vector<CrossAttentionParams> block1_;
  std::vector<CrossAttentionParams> block2_;
  MlpHead head_;
};

// Deterministic: the same (config, seed) gives bit-identical parameters.
std::unique_ptr<CCMTModel> build_model(const CCMTConfig& config, std::uint64_t seed);

// Model file layout (little-endian):
//   "CCMTMDL" | u32 version | u32 len + config JSON (sorted keys)
//   | u32 param count | per param: u32 len + name, u32 ndim, u32 dims[ndim],
//     f64 values[numel] | u32 CRC32 of every preceding byte
inline constexpr std::uint32_t kModelFormatVersion = 1;
void save_model(const CCMTModel& model, const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_model(const CCMTModel& model);
std::unique_ptr<CCMTModel> load_model(const std::filesystem::path& path);

}  // namespace ccmt
