#include "ccmt/synthetic.hpp"

#include "ccmt/error.hpp"
#include "ccmt/random.hpp"

namespace ccmt {

namespace {

double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

std::vector<double> draw_vector(std::size_t d, double scale, Rng& rng) {
  std::vector<double> v(d);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

ModalityTokens noise_tokens(Modality m, std::size_t n, std::size_t d, double noise, Rng& rng) {
  std::vector<double> v(n * d);
  for (auto& x : v) x = noise * rng.normal();
  ModalityTokens t;
  t.modality = m;
  t.tokens = Tensor({n, d}, std::move(v));
  return t;
}

void add_to_row(ModalityTokens& t, std::size_t row, const std::vector<double>& cue, double sign) {
  auto v = t.tokens.mutable_values();
  const std::size_t d = t.width();
  for (std::size_t j = 0; j < d; ++j) v[row * d + j] += sign * cue[j];
}

void finalize(ModalityTokens& t) {
  for (auto& x : t.tokens.mutable_values()) x = to_f32(x);
}

}  // namespace

std::string to_string(SyntheticTask t) { return t == SyntheticTask::Separable ? "separable" : "xor"; }

SyntheticTask parse_synthetic_task(const std::string& s) {
  if (s == "separable") return SyntheticTask::Separable;
  if (s == "xor") return SyntheticTask::XorCrossModal;
  throw ValidationError("unknown synthetic task '" + s + "' (expected separable or xor)");
}

void SyntheticSpec::validate() const {
  if (d == 0) throw ValidationError("synthetic spec: d must be positive");
  if (num_classes == 0) throw ValidationError("synthetic spec: num_classes must be positive");
  if (task == SyntheticTask::XorCrossModal && num_classes != 2)
    throw ValidationError("synthetic spec: xor task needs num_classes = 2");
  for (const auto& [lo, hi] : k_range)
    if (lo == 0 || hi < lo) throw ValidationError("synthetic spec: k_range must satisfy 1 <= min <= max");
  if (!(noise_std >= 0.0)) throw ValidationError("synthetic spec: noise_std must be >= 0");
  if (!(cue_scale >= 0.0)) throw ValidationError("synthetic spec: cue_scale must be >= 0");
  if (text_variants == 0 || text_variants > 0xFFFF)
    throw ValidationError("synthetic spec: text_variants must be in 1..65535");
}

SyntheticDataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t d = spec.d;

  // cues[class or bit][modality]
  const std::size_t n_cues = spec.task == SyntheticTask::Separable ? spec.num_classes : 1;
  std::vector<std::array<std::vector<double>, kNumModalities>> cue(n_cues);
  for (auto& per_class : cue)
    for (auto& v : per_class) v = draw_vector(d, spec.cue_scale, rng);

  // Balanced label (or bit-combination) assignment, then a seeded shuffle.
  const std::size_t buckets = spec.task == SyntheticTask::Separable ? spec.num_classes : 4;
  std::vector<std::size_t> bucket(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) bucket[i] = i % buckets;
  for (std::size_t i = bucket.size(); i > 1; --i) std::swap(bucket[i - 1], bucket[rng.uniform_index(i)]);

  SyntheticDataset out;
  auto& ds = out.dataset;
  ds.header.widths = {static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(d),
                      static_cast<std::uint32_t>(d)};
  ds.header.num_classes = static_cast<std::uint32_t>(spec.num_classes);
  ds.header.sample_count = spec.samples;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    if (spec.task == SyntheticTask::XorCrossModal)
      ds.header.label_names.push_back(c == 0 ? "same" : "different");
    else
      ds.header.label_names.push_back("class" + std::to_string(c));
  }
  ds.records.reserve(spec.samples);

  auto draw_count = [&](Modality m) {
    const auto [lo, hi] = spec.k_range[index_of(m)];
    return lo + rng.uniform_index(hi - lo + 1);
  };

  for (std::size_t i = 0; i < spec.samples; ++i) {
    SampleRecord rec;
    rec.sample_id = i;
    int c1 = 0, c2 = 0;
    if (spec.task == SyntheticTask::Separable) {
      rec.label = static_cast<std::uint32_t>(bucket[i]);
    } else {
      c1 = static_cast<int>(bucket[i] & 1u);
      c2 = static_cast<int>(bucket[i] >> 1);
      rec.label = static_cast<std::uint32_t>(c1 ^ c2);
      out.cues.push_back({c1, c2});
    }

    for (auto m : {Modality::TextOriginal, Modality::TextTranslated}) {
      const std::size_t n = draw_count(m);
      const std::size_t cls = rng.uniform_index(std::min<std::size_t>(n, 2));  // class at 0 or 1
      for (std::size_t v = 0; v < spec.text_variants; ++v) {
        auto t = noise_tokens(m, n, d, spec.noise_std, rng);
        t.class_index = cls;
        t.encoder_tag = "variant" + std::to_string(v);
        if (spec.task == SyntheticTask::Separable)
          add_to_row(t, cls, cue[rec.label][index_of(m)], 1.0);
        else if (m == Modality::TextOriginal)
          add_to_row(t, cls, cue[0][index_of(m)], c1 ? 1.0 : -1.0);
        finalize(t);
        rec.modalities[index_of(m)].push_back(std::move(t));
      }
    }
    {
      const std::size_t n = draw_count(Modality::Audio);
      auto t = noise_tokens(Modality::Audio, n, d, spec.noise_std, rng);
      t.encoder_tag = "variant0";
      for (std::size_t r = 0; r < n; ++r) {
        if (spec.task == SyntheticTask::Separable)
          add_to_row(t, r, cue[rec.label][index_of(Modality::Audio)], 1.0);
        else
          add_to_row(t, r, cue[0][index_of(Modality::Audio)], c2 ? 1.0 : -1.0);
      }
      finalize(t);
      rec.modalities[index_of(Modality::Audio)].push_back(std::move(t));
    }
    ds.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace ccmt
