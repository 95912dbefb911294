#include <doctest.h>

#include <cmath>

#include "ccmt/error.hpp"
#include "ccmt/synthetic.hpp"
#include "helpers.hpp"

using namespace ccmt;

namespace {

// Plug-in mutual information (nats) between a binary feature and the label.
double mutual_information(const std::vector<int>& x, const std::vector<std::uint32_t>& y) {
  double joint[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < x.size(); ++i) joint[x[i]][y[i]] += 1.0;
  const double n = static_cast<double>(x.size());
  double mi = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double pab = joint[a][b] / n;
      const double pa = (joint[a][0] + joint[a][1]) / n, pb = (joint[0][b] + joint[1][b]) / n;
      if (pab > 0) mi += pab * std::log(pab / (pa * pb));
    }
  return mi;
}

}  // namespace

TEST_SUITE("synthetic") {
  TEST_CASE("identical generator settings give identical datasets; a different seed does not") {
    SyntheticSpec spec;
    spec.samples = 20;
    spec.task = SyntheticTask::XorCrossModal;
    spec.seed = 7;
    const auto a = testing::scratch("sa.emb"), b = testing::scratch("sb.emb"), c = testing::scratch("sc.emb");
    write_dataset(gen_synthetic(spec).dataset, a);
    write_dataset(gen_synthetic(spec).dataset, b);
    spec.seed = 8;
    write_dataset(gen_synthetic(spec).dataset, c);
    CHECK(read_file_bytes(a) == read_file_bytes(b));
    CHECK(read_file_bytes(a) != read_file_bytes(c));
  }

  TEST_CASE("token counts stay within the requested ranges") {
    SyntheticSpec spec;
    spec.samples = 40;
    spec.k_range = {{{3, 5}, {6, 6}, {1, 9}}};
    spec.text_variants = 3;
    const auto ds = gen_synthetic(spec).dataset;
    for (const auto& r : ds.records)
      for (auto m : kAllModalities) {
        CHECK(r.variants(m).size() == (is_text(m) ? 3u : 1u));
        for (const auto& v : r.variants(m)) {
          CHECK(v.count() >= spec.k_range[index_of(m)].first);
          CHECK(v.count() <= spec.k_range[index_of(m)].second);
          CHECK(v.class_index.has_value() == is_text(m));
        }
      }
  }

  TEST_CASE("separable with zero noise: a nearest-centroid probe on class tokens is perfect") {
    SyntheticSpec spec;
    spec.samples = 60;
    spec.num_classes = 3;
    spec.noise_std = 0.0;
    spec.seed = 11;
    const auto ds = gen_synthetic(spec).dataset;
    for (auto m : {Modality::TextOriginal, Modality::TextTranslated}) {
      std::vector<std::vector<double>> centroid(3, std::vector<double>(spec.d, 0.0));
      std::vector<double> count(3, 0.0);
      for (const auto& r : ds.records) {
        const auto& v = r.variants(m)[0];
        for (std::size_t j = 0; j < spec.d; ++j) centroid[r.label][j] += v.tokens.at(*v.class_index, j);
        count[r.label] += 1.0;
      }
      for (std::size_t c = 0; c < 3; ++c)
        for (auto& x : centroid[c]) x /= count[c];
      std::size_t correct = 0;
      for (const auto& r : ds.records) {
        const auto& v = r.variants(m)[0];
        std::size_t best = 0;
        double best_dist = INFINITY;
        for (std::size_t c = 0; c < 3; ++c) {
          double dist = 0.0;
          for (std::size_t j = 0; j < spec.d; ++j) {
            const double diff = v.tokens.at(*v.class_index, j) - centroid[c][j];
            dist += diff * diff;
          }
          if (dist < best_dist) {
            best_dist = dist;
            best = c;
          }
        }
        correct += best == r.label;
      }
      CHECK(correct == ds.records.size());
    }
  }

  TEST_CASE("xor: balanced cues carry zero mutual information per modality") {
    SyntheticSpec spec;
    spec.samples = 256;
    spec.task = SyntheticTask::XorCrossModal;
    spec.seed = 5;
    const auto syn = gen_synthetic(spec);
    std::vector<int> c1, c2;
    std::vector<std::uint32_t> y;
    int combos[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < syn.cues.size(); ++i) {
      c1.push_back(syn.cues[i][0]);
      c2.push_back(syn.cues[i][1]);
      y.push_back(syn.dataset.records[i].label);
      CHECK(static_cast<int>(y.back()) == (c1.back() ^ c2.back()));
      ++combos[c1.back()][c2.back()];
    }
    for (auto& row : combos)
      for (int n : row) CHECK(n == 64);
    CHECK(std::abs(mutual_information(c1, y)) < 1e-12);
    CHECK(std::abs(mutual_information(c2, y)) < 1e-12);
  }

  TEST_CASE("xor: cues are planted with the documented signs") {
    SyntheticSpec spec;
    spec.samples = 8;
    spec.task = SyntheticTask::XorCrossModal;
    spec.noise_std = 0.0;
    const auto syn = gen_synthetic(spec);
    const auto& first = syn.dataset.records[0];
    for (std::size_t i = 0; i < syn.cues.size(); ++i) {
      const auto& r = syn.dataset.records[i];
      const auto& text = r.variants(Modality::TextOriginal)[0];
      const auto& ref = first.variants(Modality::TextOriginal)[0];
      const double sign = (syn.cues[i][0] == syn.cues[0][0]) ? 1.0 : -1.0;
      CHECK(text.tokens.at(*text.class_index, 0) == sign * ref.tokens.at(*ref.class_index, 0));
      const auto& audio = r.variants(Modality::Audio)[0];
      const auto& aref = first.variants(Modality::Audio)[0];
      const double asign = (syn.cues[i][1] == syn.cues[0][1]) ? 1.0 : -1.0;
      CHECK(audio.tokens.at(0, 1) == asign * aref.tokens.at(0, 1));
      for (double v : r.variants(Modality::TextTranslated)[0].tokens.values()) CHECK(v == 0.0);
    }
  }

  TEST_CASE("invalid specs are rejected") {
    SyntheticSpec spec;
    spec.d = 0;
    CHECK_THROWS_AS(gen_synthetic(spec), ValidationError);
    spec = {};
    spec.k_range[0] = {5, 2};
    CHECK_THROWS_AS(gen_synthetic(spec), ValidationError);
    spec = {};
    spec.task = SyntheticTask::XorCrossModal;
    spec.num_classes = 3;
    CHECK_THROWS_AS(gen_synthetic(spec), ValidationError);
    CHECK_THROWS_AS(parse_synthetic_task("ring"), ValidationError);
  }
}
