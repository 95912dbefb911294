#include <doctest.h>

#include <cmath>

#include "ccmt/error.hpp"
#include "ccmt/optim.hpp"
#include "ccmt/parameter.hpp"
#include "helpers.hpp"

using namespace ccmt;

TEST_SUITE("optim") {
  TEST_CASE("zero gradients leave parameters unchanged") {
    ParameterSet ps;
    auto w = ps.add("w", testing::random_tensor({3, 2}, 1));
    const std::vector<double> before(w.values().begin(), w.values().end());
    AdamState state;
    for (int step = 0; step < 5; ++step) {
      ps.zero_grad();
      adam_step(ps, state);
    }
    CHECK(state.step_count == 5);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(w.at(i) == before[i]);
  }

  TEST_CASE("first step moves each parameter by lr against the gradient sign") {
    ParameterSet ps;
    auto w = ps.add("w", Tensor({4}, {0.5, -1.0, 2.0, 0.0}));
    const std::vector<double> g{3.0, -0.25, 0.1, -40.0};
    std::copy(g.begin(), g.end(), w.mutable_grad().begin());
    AdamState state(AdamOptions{1e-3});
    const std::vector<double> before(w.values().begin(), w.values().end());
    adam_step(ps, state);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double moved = w.at(i) - before[i];
      CHECK(std::abs(std::abs(moved) - 1e-3) <= 1e-6 * 1e-3);
      CHECK((moved < 0) == (g[i] > 0));
    }
  }

  TEST_CASE("identical gradients and state give identical updates") {
    ParameterSet ps;
    auto a = ps.add("a", Tensor({2}, {1.0, 1.0}));
    auto b = ps.add("b", Tensor({2}, {1.0, 1.0}));
    AdamState state;
    for (int step = 0; step < 3; ++step) {
      a.mutable_grad()[0] = b.mutable_grad()[0] = 0.3 * step - 0.2;
      a.mutable_grad()[1] = b.mutable_grad()[1] = 1.5;
      adam_step(ps, state, true);
    }
    CHECK(a.at(0) == b.at(0));
    CHECK(a.at(1) == b.at(1));
    for (const auto& m : state.second_moment)
      for (double v : m) CHECK(v >= 0.0);
  }

  TEST_CASE("zero_grad flag clears gradients after the step") {
    ParameterSet ps;
    auto a = ps.add("a", Tensor({2}, {1.0, 2.0}));
    a.mutable_grad()[0] = 1.0;
    AdamState state;
    adam_step(ps, state, false);
    CHECK(a.grad()[0] == 1.0);
    adam_step(ps, state, true);
    CHECK(a.grad()[0] == 0.0);
  }

  TEST_CASE("missing gradient names the parameter") {
    ParameterSet ps;
    ps.add("layer.weight", Tensor({1}, {1.0}));
    AdamState state;
    try {
      adam_step(ps, state);
      FAIL("expected ContractError");
    } catch (const ContractError& e) {
      CHECK(std::string(e.what()).find("layer.weight") != std::string::npos);
    }
  }

  TEST_CASE("parameter names are unique") {
    ParameterSet ps;
    ps.add("x", Tensor({1}, {1.0}));
    CHECK_THROWS_AS(ps.add("x", Tensor({1}, {2.0})), ValidationError);
    CHECK(ps.items()[0].tensor.requires_grad());
  }
}
