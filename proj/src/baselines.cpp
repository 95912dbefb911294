#include "ccmt/baselines.hpp"

#include <algorithm>

#include "ccmt/error.hpp"
#include "ccmt/random.hpp"

namespace ccmt {

std::string to_string(FusionKind k) {
  switch (k) {
    case FusionKind::MajorityVote: return "vote";
    case FusionKind::MlpFusion: return "mlp";
    case FusionKind::VanillaTransformer: return "transformer";
  }
  return "mlp";
}

FusionKind parse_fusion_kind(const std::string& s) {
  if (s == "vote") return FusionKind::MajorityVote;
  if (s == "mlp") return FusionKind::MlpFusion;
  if (s == "transformer") return FusionKind::VanillaTransformer;
  throw ValidationError("unknown fusion '" + s + "' (expected vote, mlp or transformer)");
}

BaselineConfig BaselineConfig::resolved() const {
  BaselineConfig c = *this;
  if (c.hidden == 0) c.hidden = c.d;
  if (c.d_ff == 0) c.d_ff = 4 * c.d;
  for (auto& w : c.input_widths)
    if (w == 0) w = c.d;
  if (c.k == 0 || c.d == 0 || c.num_classes == 0)
    throw ValidationError("baseline config: k, d and num_classes must be positive");
  return c;
}

std::size_t majority_vote(std::span<const std::size_t> predictions) {
  if (predictions.empty()) throw ValidationError("majority_vote: no predictions");
  const std::size_t top = *std::max_element(predictions.begin(), predictions.end());
  std::vector<std::size_t> counts(top + 1, 0);
  for (auto p : predictions) ++counts[p];
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

Tensor modality_summary(const Tensor& tokens, Modality m) {
  return is_text(m) ? row(tokens, 0) : mean_rows(tokens);
}

namespace {
void check_input(const UniformTokenSet& s, Modality m, const BaselineConfig& c) {
  const Tensor& x = s[m];
  const auto w = c.input_widths[index_of(m)];
  if (x.ndim() != 2 || x.rows() != c.k || x.cols() != w)
    throw DimensionError("baseline: " + to_string(m) + " tokens " + shape_to_string(x.shape()) +
                         " expected [" + std::to_string(c.k) + "x" + std::to_string(w) + "]");
}
}  // namespace

UnimodalMlp::UnimodalMlp(Modality modality, const BaselineConfig& config, std::uint64_t seed)
    : modality_(modality), config_(config.resolved()) {
  Rng rng(seed);
  head_ = make_mlp_head(params_, "unimodal." + ccmt::to_string(modality), config_.input_widths[index_of(modality)],
                        config_.hidden, config_.num_classes, rng, config_.init_std, config_.activation);
}

Tensor UnimodalMlp::forward(const UniformTokenSet& sample) const {
  check_input(sample, modality_, config_);
  return head_(modality_summary(sample[modality_], modality_));
}

MlpFusion::MlpFusion(const BaselineConfig& config, std::uint64_t seed) : config_(config.resolved()) {
  Rng rng(seed);
  std::size_t in = 0;
  for (auto w : config_.input_widths) in += w;
  head_ = make_mlp_head(params_, "mlp_fusion", in, config_.hidden, config_.num_classes, rng,
                        config_.init_std, config_.activation);
}

Tensor MlpFusion::forward(const UniformTokenSet& sample) const {
  std::vector<Tensor> parts;
  for (auto m : kAllModalities) {
    check_input(sample, m, config_);
    parts.push_back(modality_summary(sample[m], m));
  }
  return head_(concat_cols(parts));
}

VanillaTransformer::VanillaTransformer(const BaselineConfig& config, std::uint64_t seed)
    : config_(config.resolved()) {
  const auto& c = config_;
  for (auto w : c.input_widths)
    if (w != c.d) throw DimensionError("vanilla transformer: every modality must have width d");
  Rng rng(seed);
  class_token_ = params_.add("transformer.cls", Tensor::normal({1, c.d}, c.init_std, rng));
  for (auto m : kAllModalities)
    positional_[index_of(m)] =
        params_.add("transformer.pos." + ccmt::to_string(m), Tensor::normal({c.k, c.d}, c.init_std, rng));
  const BlockDims dims{c.d, c.d_head, c.heads, c.d_ff};
  for (std::size_t l = 0; l < c.layers; ++l)
    blocks_.push_back(make_block_params(params_, "transformer.block" + std::to_string(l), dims, rng,
                                        c.init_std, c.activation));
  head_ = make_mlp_head(params_, "transformer.head", c.d, c.hidden, c.num_classes, rng, c.init_std,
                        c.activation);
}

Tensor VanillaTransformer::forward(const UniformTokenSet& sample) const {
  std::vector<Tensor> parts{class_token_};
  for (auto m : kAllModalities) {
    check_input(sample, m, config_);
    parts.push_back(add(sample[m], positional_[index_of(m)]));
  }
  Tensor x = concat_rows(parts);
  for (const auto& block : blocks_) x = ccmt_block_forward(x, x, block, ResidualMode::KvResidual).output;
  return head_(row(x, 0));
}

MajorityVoteEnsemble::MajorityVoteEnsemble(const BaselineConfig& config, std::uint64_t seed) {
  for (auto m : kAllModalities)
    members_[index_of(m)] = std::make_unique<UnimodalMlp>(m, config, mix_seed({seed, index_of(m)}));
}

std::size_t MajorityVoteEnsemble::predict(const UniformTokenSet& sample) const {
  std::array<std::size_t, kNumModalities> votes{};
  for (std::size_t i = 0; i < kNumModalities; ++i) votes[i] = ccmt::predict(*members_[i], sample);
  return majority_vote(votes);
}

}  // namespace ccmt
