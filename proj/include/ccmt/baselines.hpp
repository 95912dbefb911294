#pragma once

// Fusion baselines that consume the same UniformTokenSet inputs as CCMT.

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ccmt/attention.hpp"
#include "ccmt/classifier.hpp"
#include "ccmt/layers.hpp"

namespace ccmt {

enum class FusionKind { MajorityVote, MlpFusion, VanillaTransformer };

std::string to_string(FusionKind k);
FusionKind parse_fusion_kind(const std::string& s);  // vote | mlp | transformer

struct BaselineConfig {
  std::size_t k = 100;
  std::size_t d = 512;
  std::array<std::size_t, kNumModalities> input_widths{0, 0, 0};  // 0 -> d
  std::size_t num_classes = 2;
  std::size_t hidden = 0;  // MLP hidden width, 0 -> d
  // Vanilla transformer only.
  std::size_t layers = 8;
  std::size_t heads = 8;
  std::size_t d_head = 512;
  std::size_t d_ff = 0;  // 0 -> 4 * d
  Activation activation = Activation::Gelu;
  double init_std = 0.02;

  BaselineConfig resolved() const;
};

// Plurality winner; ties go to the lowest class index.
std::size_t majority_vote(std::span<const std::size_t> predictions);

// Summary vector of a modality: its class token (row 0) for text, the mean of
// all tokens for audio.
Tensor modality_summary(const Tensor& tokens, Modality m);

// One-modality classifier: MLP over modality_summary().
class UnimodalMlp final : public Classifier {
 public:
  UnimodalMlp(Modality modality, const BaselineConfig& config, std::uint64_t seed);
  Tensor forward(const UniformTokenSet& sample) const override;
  ParameterSet& parameters() override { return params_; }
  const ParameterSet& parameters() const override { return params_; }
  std::size_t num_classes() const override { return config_.num_classes; }
  std::size_t tokens_per_modality() const override { return config_.k; }
  std::string kind() const override { return "unimodal:" + ccmt::to_string(modality_); }
  Modality modality() const { return modality_; }

 private:
  Modality modality_;
  BaselineConfig config_;
  ParameterSet params_;
  MlpHead head_;
};

// Concatenated modality summaries (3 widths) -> hidden -> classes.
class MlpFusion final : public Classifier {
 public:
  MlpFusion(const BaselineConfig& config, std::uint64_t seed);
  Tensor forward(const UniformTokenSet& sample) const override;
  ParameterSet& parameters() override { return params_; }
  const ParameterSet& parameters() const override { return params_; }
  std::size_t num_classes() const override { return config_.num_classes; }
  std::size_t tokens_per_modality() const override { return config_.k; }
  std::string kind() const override { return "mlp"; }
  const MlpHead& head() const { return head_; }

 private:
  BaselineConfig config_;
  ParameterSet params_;
  MlpHead head_;
};

// Self-attention over [class token; text_original; text_translated; audio]
// (3k + 1 rows) with per-modality positional embeddings. Blocks are post-norm
// with the same feed-forward as CCMT; the head reads row 0.
class VanillaTransformer final : public Classifier {
 public:
  VanillaTransformer(const BaselineConfig& config, std::uint64_t seed);
  Tensor forward(const UniformTokenSet& sample) const override;
  ParameterSet& parameters() override { return params_; }
  const ParameterSet& parameters() const override { return params_; }
  std::size_t num_classes() const override { return config_.num_classes; }
  std::size_t tokens_per_modality() const override { return config_.k; }
  std::string kind() const override { return "transformer"; }

  const BaselineConfig& config() const { return config_; }
  const Tensor& class_token() const { return class_token_; }
  const std::array<Tensor, kNumModalities>& positional() const { return positional_; }
  const std::vector<CrossAttentionParams>& blocks() const { return blocks_; }
  const MlpHead& head() const { return head_; }

 private:
  BaselineConfig config_;
  ParameterSet params_;
  Tensor class_token_;
  std::array<Tensor, kNumModalities> positional_;
  std::vector<CrossAttentionParams> blocks_;
  MlpHead head_;
};

// Three unimodal classifiers combined by plurality vote.
class MajorityVoteEnsemble {
 public:
  MajorityVoteEnsemble(const BaselineConfig& config, std::uint64_t seed);
  std::size_t predict(const UniformTokenSet& sample) const;
  std::array<std::unique_ptr<UnimodalMlp>, kNumModalities>& members() { return members_; }

 private:
  std::array<std::unique_ptr<UnimodalMlp>, kNumModalities> members_;
};

}  // namespace ccmt
