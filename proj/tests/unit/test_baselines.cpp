#include <doctest.h>

#include "ccmt/baselines.hpp"
#include "ccmt/error.hpp"
#include "ccmt/random.hpp"
#include "ccmt/train.hpp"
#include "helpers.hpp"
#include "naive.hpp"

using namespace ccmt;

namespace {

BaselineConfig tiny(std::size_t layers = 1) {
  BaselineConfig c;
  c.k = 3;
  c.d = 4;
  c.hidden = 5;
  c.layers = layers;
  c.heads = 2;
  c.d_head = 3;
  c.d_ff = 6;
  return c;
}

UniformTokenSet sample(std::size_t k, std::array<std::size_t, 3> widths, std::uint64_t seed) {
  Rng rng(seed);
  UniformTokenSet s;
  for (auto m : kAllModalities) s[m] = Tensor::normal({k, widths[index_of(m)]}, 1.0, rng);
  s.label = 0;
  return s;
}

void randomize(ParameterSet& ps, std::uint64_t seed, double scale) {
  Rng rng(seed);
  auto flat = ps.flatten_values();
  for (auto& v : flat) v = scale * rng.normal();
  ps.assign_flat(flat);
}

}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("majority vote examples") {
    std::vector<std::size_t> a{1, 1, 0}, b{0, 1, 2}, c{2, 2, 2}, d{3, 1, 3, 1};
    CHECK(majority_vote(a) == 1);
    CHECK(majority_vote(b) == 0);
    CHECK(majority_vote(c) == 2);
    CHECK(majority_vote(d) == 1);
    CHECK_THROWS_AS(majority_vote(std::vector<std::size_t>{}), ValidationError);
  }

  TEST_CASE("property: majority vote is permutation invariant") {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
      std::vector<std::size_t> v(1 + rng.uniform_index(7));
      for (auto& x : v) x = rng.uniform_index(4);
      const auto expected = majority_vote(v);
      for (int s = 0; s < 5; ++s) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
        CHECK(majority_vote(v) == expected);
      }
    }
  }

  TEST_CASE("mlp fusion with zero weights returns its output bias") {
    auto c = tiny();
    c.num_classes = 3;
    MlpFusion m(c, 1);
    for (auto& p : m.parameters().items())
      for (auto& v : p.tensor.mutable_values()) v = 0.0;
    auto bias = m.parameters().find("mlp_fusion.fc2.bias")->tensor;
    bias.mutable_values()[0] = 0.5;
    bias.mutable_values()[2] = -1.5;
    const auto out = m.forward(sample(3, {4, 4, 4}, 2));
    CHECK(oracle::to_vec(out) == std::vector<double>{0.5, 0.0, -1.5});
  }

  TEST_CASE("summaries: text reads row 0, audio averages rows") {
    Tensor t({2, 2}, {1, 2, 3, 4});
    CHECK(oracle::to_vec(modality_summary(t, Modality::TextOriginal)) == std::vector<double>{1, 2});
    CHECK(oracle::to_vec(modality_summary(t, Modality::Audio)) == std::vector<double>{2, 3});
  }

  TEST_CASE("baseline gradients match central differences") {
    auto c = tiny();
    c.input_widths = {4, 3, 5};
    c.init_std = 0.5;
    const auto x = sample(3, {4, 3, 5}, 3);
    MlpFusion fusion(c, 4);
    CHECK(grad_check_model(fusion, x).passed);
    UnimodalMlp uni(Modality::Audio, c, 5);
    CHECK(grad_check_model(uni, x).passed);
    auto vc = tiny();
    vc.init_std = 0.3;
    VanillaTransformer vt(vc, 6);
    const auto report = grad_check_model(vt, sample(3, {4, 4, 4}, 7));
    CHECK(report.passed);
    CHECK(report.max_relative_error < 1e-4);
  }

  TEST_CASE("vanilla transformer with zero layers ignores its input") {
    VanillaTransformer vt(tiny(0), 8);
    CHECK(vt.blocks().empty());
    const auto a = oracle::to_vec(vt.forward(sample(3, {4, 4, 4}, 9)));
    const auto b = oracle::to_vec(vt.forward(sample(3, {4, 4, 4}, 10)));
    CHECK(a == b);
  }

  TEST_CASE("vanilla transformer matches the naive oracle") {
    for (std::size_t layers : {1, 2}) {
      VanillaTransformer vt(tiny(layers), 11);
      randomize(vt.parameters(), 12, 0.5);
      const auto x = sample(3, {4, 4, 4}, 13);
      CHECK(oracle::max_abs_diff(oracle::to_vec(vt.forward(x)), oracle::vanilla_forward(vt, x)) < 1e-9);
    }
  }

  TEST_CASE("property: vanilla transformer is invariant to a row permutation within a modality") {
    VanillaTransformer vt(tiny(2), 14);
    randomize(vt.parameters(), 15, 0.5);
    const auto x = sample(3, {4, 4, 4}, 16);
    const auto base = oracle::to_vec(vt.forward(x));
    const std::vector<std::size_t> perm{2, 0, 1};
    auto y = x;
    {
      NoGradGuard g;
      y[Modality::Audio] = gather_rows(x[Modality::Audio], perm);
      auto pos = vt.parameters().find("transformer.pos.audio")->tensor;
      const auto p = gather_rows(pos, perm);
      std::copy(p.values().begin(), p.values().end(), pos.mutable_values().begin());
    }
    CHECK(oracle::max_abs_diff(base, oracle::to_vec(vt.forward(y))) < 1e-12);
  }

  TEST_CASE("parameter names and counts") {
    auto c = tiny(1);
    VanillaTransformer vt(c, 0);
    const auto r = c.resolved();
    const std::size_t expected = r.d + 3 * r.k * r.d + block_parameter_count({r.d, r.d_head, r.heads, r.d_ff}) +
                                 mlp_head_parameter_count(r.d, r.hidden, r.num_classes);
    CHECK(vt.parameters().scalar_count() == expected);
    CHECK(vt.parameters().find("transformer.block0.head1.w_key"));
    MlpFusion mf(c, 0);
    CHECK(mf.parameters().scalar_count() == mlp_head_parameter_count(12, 5, 2));
    auto wide = c;
    wide.input_widths = {4, 4, 6};
    CHECK_THROWS_AS(VanillaTransformer(wide, 0), DimensionError);
    CHECK(parse_fusion_kind("vote") == FusionKind::MajorityVote);
    CHECK_THROWS_AS(parse_fusion_kind("late"), ValidationError);
  }

  TEST_CASE("ensemble members are independently seeded unimodal models") {
    MajorityVoteEnsemble e(tiny(), 17);
    auto& m = e.members();
    CHECK(m[0]->modality() == Modality::TextOriginal);
    CHECK(m[2]->modality() == Modality::Audio);
    CHECK(m[0]->parameters().items()[0].tensor.at(0) != m[1]->parameters().items()[0].tensor.at(0));
    const auto x = sample(3, {4, 4, 4}, 18);
    std::array<std::size_t, 3> votes{};
    for (std::size_t i = 0; i < 3; ++i) votes[i] = predict(*m[i], x);
    CHECK(e.predict(x) == majority_vote(votes));
  }
}
