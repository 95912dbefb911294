#pragma once

// Desk-scale synthetic multimodal datasets with known structure.
//
// Every token starts as N(0, noise_std^2) noise. Cue vectors are drawn once
// per dataset from N(0, cue_scale^2) per entry.
//
//   Separable:    each class c has its own cue per modality. It is added to
//                 the class token of both text modalities and to every audio
//                 token (audio has no class token).
//   XorCrossModal (2 classes): bits c1, c2 are balanced over the dataset
//                 (each of the four combinations appears equally often, up
//                 to rounding). The text_original class token gets
//                 (2 c1 - 1) * cue_text, every audio token gets
//                 (2 c2 - 1) * cue_audio, and label = c1 XOR c2. The
//                 translated text is pure noise. No single modality carries
//                 information about the label.
//
// All values are rounded to float32 so that in-memory records equal what the
// binary format stores.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ccmt/dataset.hpp"

namespace ccmt {

enum class SyntheticTask { Separable, XorCrossModal };

std::string to_string(SyntheticTask t);
SyntheticTask parse_synthetic_task(const std::string& s);  // separable | xor

struct SyntheticSpec {
  std::size_t samples = 256;
  // Inclusive token-count range per modality.
  std::array<std::pair<std::size_t, std::size_t>, kNumModalities> k_range{
      {{8, 24}, {8, 24}, {16, 32}}};
  std::size_t d = 16;
  std::size_t num_classes = 2;
  SyntheticTask task = SyntheticTask::Separable;
  double noise_std = 1.0;
  double cue_scale = 1.0;
  // Variants per text modality (mirrors transcripts from several ASR models).
  std::size_t text_variants = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticDataset {
  Dataset dataset;
  // Planted cue bits per sample (XOR task only): {c1, c2}.
  std::vector<std::array<int, 2>> cues;
};

SyntheticDataset gen_synthetic(const SyntheticSpec& spec);

}  // namespace ccmt
