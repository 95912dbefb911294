#pragma once

// Per-modality token sets and their conversion to fixed-size k-token inputs.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccmt/tensor.hpp"

namespace ccmt {

enum class Modality : std::uint8_t { TextOriginal = 0, TextTranslated = 1, Audio = 2 };
inline constexpr std::size_t kNumModalities = 3;
inline constexpr std::array<Modality, kNumModalities> kAllModalities = {
    Modality::TextOriginal, Modality::TextTranslated, Modality::Audio};

std::string to_string(Modality m);
Modality parse_modality(const std::string& s);  // text_original | text_translated | audio
constexpr std::size_t index_of(Modality m) { return static_cast<std::size_t>(m); }
constexpr bool is_text(Modality m) { return m != Modality::Audio; }

// One encoder output for one modality: n x d_m tokens. Text modalities carry
// a class token; audio does not.
struct ModalityTokens {
  Modality modality = Modality::Audio;
  Tensor tokens;
  std::optional<std::size_t> class_index;
  std::string encoder_tag;

  std::size_t count() const { return tokens.rows(); }
  std::size_t width() const { return tokens.cols(); }
  // Throws ValidationError on n == 0, an out-of-range class index, or a class
  // token on the wrong kind of modality.
  void validate() const;
};

// One labeled example. Each modality holds one or more variants (alternative
// transcripts/encodings of the same sample).
struct SampleRecord {
  std::uint64_t sample_id = 0;
  std::uint32_t label = 0;
  std::array<std::vector<ModalityTokens>, kNumModalities> modalities;

  const std::vector<ModalityTokens>& variants(Modality m) const { return modalities[index_of(m)]; }
};

// Model input: exactly k rows per modality, text class tokens at row 0.
struct UniformTokenSet {
  std::array<Tensor, kNumModalities> tokens;
  std::uint32_t label = 0;
  std::uint64_t sample_id = 0;

  const Tensor& operator[](Modality m) const { return tokens[index_of(m)]; }
  Tensor& operator[](Modality m) { return tokens[index_of(m)]; }
};

// Row indices chosen by uniformize():
//   n > k:  k distinct rows uniformly at random, always including the class row;
//   n < k:  every row once plus k - n uniform draws with replacement;
//   n == k: every row once.
// Rows are in ascending original order, except that one instance of the class
// row is moved to position 0. Deterministic in (n, class_index, k, seed).
std::vector<std::size_t> uniformize_indices(std::size_t n, std::optional<std::size_t> class_index,
                                            std::size_t k, std::uint64_t seed);

Tensor uniformize(const ModalityTokens& m, std::size_t k, std::uint64_t seed);

struct VariantMode {
  enum class Kind { Random, Fixed } kind = Kind::Fixed;
  std::size_t index = 0;

  static VariantMode random() { return {Kind::Random, 0}; }
  static VariantMode fixed(std::size_t i) { return {Kind::Fixed, i}; }
};

std::size_t select_variant_index(std::size_t variant_count, VariantMode mode, std::uint64_t seed);
const ModalityTokens& select_variant(const std::vector<ModalityTokens>& variants, VariantMode mode,
                                     std::uint64_t seed);

// Seed for everything random about one sample/modality under a run seed:
// mix_seed({rng_seed, sample_id, modality, salt}).
std::uint64_t modality_seed(std::uint64_t rng_seed, std::uint64_t sample_id, Modality m,
                            std::uint64_t salt);

// Run seed for one training epoch; evaluation uses the bare seed.
std::uint64_t epoch_seed(std::uint64_t seed, std::uint64_t epoch);

// Variant choice then uniformization of every modality.
// Training (eval_mode = false) picks variants at random, sharing one draw
// between the two text modalities when their variant counts agree, since
// variant i of the translation is the translation of variant i. Evaluation
// always takes variant 0. The result is a pure function of the arguments.
UniformTokenSet assemble(const SampleRecord& sample, std::size_t k, std::uint64_t rng_seed,
                         bool eval_mode);

}  // namespace ccmt
