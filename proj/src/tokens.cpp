#include "ccmt/tokens.hpp"

#include <algorithm>
#include <numeric>

#include "ccmt/error.hpp"
#include "ccmt/random.hpp"

namespace ccmt {

namespace {
constexpr std::uint64_t kSaltRows = 0x726f7773;     // "rows"
constexpr std::uint64_t kSaltVariant = 0x76617269;  // "vari"
constexpr std::uint64_t kSaltEpoch = 0x65706f63;    // "epoc"
}  // namespace

std::string to_string(Modality m) {
  switch (m) {
    case Modality::TextOriginal: return "text_original";
    case Modality::TextTranslated: return "text_translated";
    case Modality::Audio: return "audio";
  }
  return "?";
}

Modality parse_modality(const std::string& s) {
  for (auto m : kAllModalities)
    if (to_string(m) == s) return m;
  throw ValidationError("unknown modality '" + s + "'");
}

void ModalityTokens::validate() const {
  if (tokens.numel() == 0 || tokens.ndim() != 2)
    throw ValidationError(to_string(modality) + ": token matrix must be n x d with n >= 1");
  if (is_text(modality) && !class_index)
    throw ValidationError(to_string(modality) + ": text modality requires a class token");
  if (!is_text(modality) && class_index)
    throw ValidationError(to_string(modality) + ": audio tokens carry no class token");
  if (class_index && *class_index >= count())
    throw ValidationError(to_string(modality) + ": class index " + std::to_string(*class_index) +
                          " out of range for " + std::to_string(count()) + " tokens");
}

std::vector<std::size_t> uniformize_indices(std::size_t n, std::optional<std::size_t> class_index,
                                            std::size_t k, std::uint64_t seed) {
  if (k < 1) throw ValidationError("uniformize: k must be at least 1");
  if (n < 1) throw ValidationError("uniformize: modality has no tokens");
  if (class_index && *class_index >= n)
    throw ValidationError("uniformize: class index out of range");

  Rng rng(seed);
  std::vector<std::size_t> picked;
  picked.reserve(k);
  if (n > k) {
    std::vector<std::size_t> pool;
    pool.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      if (!class_index || i != *class_index) pool.push_back(i);
    std::size_t need = k;
    if (class_index) {
      picked.push_back(*class_index);
      --need;
    }
    // Partial Fisher-Yates: the first `need` slots become a uniform sample.
    for (std::size_t i = 0; i < need; ++i) {
      const std::size_t j = i + rng.uniform_index(pool.size() - i);
      std::swap(pool[i], pool[j]);
      picked.push_back(pool[i]);
    }
  } else {
    picked.resize(n);
    std::iota(picked.begin(), picked.end(), std::size_t{0});
    for (std::size_t i = n; i < k; ++i) picked.push_back(rng.uniform_index(n));
  }

  std::sort(picked.begin(), picked.end());
  if (class_index) {
    auto it = std::find(picked.begin(), picked.end(), *class_index);
    std::rotate(picked.begin(), it, it + 1);
  }
  return picked;
}

Tensor uniformize(const ModalityTokens& m, std::size_t k, std::uint64_t seed) {
  m.validate();
  auto idx = uniformize_indices(m.count(), m.class_index, k, seed);
  NoGradGuard no_grad;
  return gather_rows(m.tokens, idx);
}

std::size_t select_variant_index(std::size_t variant_count, VariantMode mode, std::uint64_t seed) {
  if (variant_count == 0) throw ValidationError("select_variant: no variants");
  if (mode.kind == VariantMode::Kind::Fixed) {
    if (mode.index >= variant_count)
      throw ValidationError("select_variant: fixed index " + std::to_string(mode.index) +
                            " out of range for " + std::to_string(variant_count) + " variants");
    return mode.index;
  }
  if (variant_count == 1) return 0;
  Rng rng(seed);
  return rng.uniform_index(variant_count);
}

const ModalityTokens& select_variant(const std::vector<ModalityTokens>& variants, VariantMode mode,
                                     std::uint64_t seed) {
  return variants[select_variant_index(variants.size(), mode, seed)];
}

std::uint64_t modality_seed(std::uint64_t rng_seed, std::uint64_t sample_id, Modality m,
                            std::uint64_t salt) {
  return mix_seed({rng_seed, sample_id, static_cast<std::uint64_t>(m), salt});
}

std::uint64_t epoch_seed(std::uint64_t seed, std::uint64_t epoch) {
  return mix_seed({seed, epoch, kSaltEpoch});
}

UniformTokenSet assemble(const SampleRecord& sample, std::size_t k, std::uint64_t rng_seed,
                         bool eval_mode) {
  if (k < 1) throw ValidationError("assemble: k must be at least 1");
  for (auto m : kAllModalities)
    if (sample.variants(m).empty())
      throw ValidationError("assemble: sample " + std::to_string(sample.sample_id) +
                            " is missing modality " + to_string(m));

  std::array<std::size_t, kNumModalities> chosen{};
  if (eval_mode) {
    chosen.fill(0);
  } else {
    for (auto m : kAllModalities)
      chosen[index_of(m)] = select_variant_index(
          sample.variants(m).size(), VariantMode::random(),
          modality_seed(rng_seed, sample.sample_id, m, kSaltVariant));
    const auto& orig = sample.variants(Modality::TextOriginal);
    const auto& trans = sample.variants(Modality::TextTranslated);
    if (orig.size() == trans.size())
      chosen[index_of(Modality::TextTranslated)] = chosen[index_of(Modality::TextOriginal)];
  }

  UniformTokenSet out;
  out.label = sample.label;
  out.sample_id = sample.sample_id;
  for (auto m : kAllModalities) {
    const auto& variant = sample.variants(m)[chosen[index_of(m)]];
    if (variant.modality != m)
      throw ValidationError("assemble: variant stored under " + to_string(m) + " is tagged " +
                            to_string(variant.modality));
    out[m] = uniformize(variant, k, modality_seed(rng_seed, sample.sample_id, m, kSaltRows));
  }
  return out;
}

}  // namespace ccmt
