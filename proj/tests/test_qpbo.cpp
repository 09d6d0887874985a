#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oiekit/qpbo.hpp"
#include "support/oracles.hpp"

using namespace oiekit;

namespace {

PseudoBooleanFunction two_node_example() {
  PseudoBooleanFunction f(2);
  f.add_unary(0, 0.0, -1.0);
  f.add_unary(1, 0.0, -1.0);
  f.add_pairwise(0, 1, 0.0, 0.0, 0.0, 5.0);
  return f;
}

double cut_capacity(const FlowNetwork& net, const std::vector<bool>& source_side) {
  double cap = 0.0;
  for (std::size_t i = 0; i < net.arcs.size(); i += 2) {  // even indices = forward arcs
    const auto& arc = net.arcs[i];
    if (source_side[static_cast<std::size_t>(arc.from)] &&
        !source_side[static_cast<std::size_t>(arc.to)]) {
      cap += arc.capacity;
    }
  }
  return cap;
}

}  // namespace

TEST_CASE("energy evaluates unary, pairwise, and constant terms") {
  const auto f = two_node_example();
  CHECK(energy(f, {1, 1}) == Catch::Approx(3.0));
  CHECK(energy(f, {0, 0}) == Catch::Approx(0.0));
  CHECK(energy(f, {1, 0}) == Catch::Approx(-1.0));
  CHECK(energy(f, {0, 1}) == Catch::Approx(-1.0));

  PseudoBooleanFunction with_const(1);
  with_const.constant = 2.5;
  with_const.add_unary(0, 0.5, -1.0);
  CHECK(energy(with_const, {0}) == Catch::Approx(3.0));
  CHECK(energy(with_const, {1}) == Catch::Approx(1.5));

  CHECK_THROWS_AS(energy(f, {1}), std::invalid_argument);
}

TEST_CASE("exhaustive_solve finds the minimum and resolves the tie") {
  const auto f = two_node_example();
  const auto best = exhaustive_solve(f);
  CHECK(best.energy == Catch::Approx(-1.0));
  CHECK(best.labeling == std::vector<int>{1, 0});
}

TEST_CASE("exhaustive_solve basics") {
  PseudoBooleanFunction single(1);
  single.add_unary(0, 0.0, -3.0);
  const auto one = exhaustive_solve(single);
  CHECK(one.labeling == std::vector<int>{1});
  CHECK(one.energy == Catch::Approx(-3.0));

  PseudoBooleanFunction empty(0);
  empty.constant = 1.25;
  const auto none = exhaustive_solve(empty);
  CHECK(none.labeling.empty());
  CHECK(none.energy == Catch::Approx(1.25));

  PseudoBooleanFunction big(26);
  CHECK_THROWS_AS(exhaustive_solve(big), std::invalid_argument);
}

TEST_CASE("max_flow on a path takes the bottleneck") {
  FlowNetwork net(3, 0, 2);
  net.add_edge(0, 1, 3.0);
  net.add_edge(1, 2, 1.0);
  const auto result = max_flow(net);
  CHECK(result.value == Catch::Approx(1.0));
  CHECK(result.source_side[0]);
  CHECK(result.source_side[1]);
  CHECK(!result.source_side[2]);
}

TEST_CASE("max_flow on the diamond with a crossing edge") {
  // s -> a (10), s -> b (10), a -> b (1), a -> t (10), b -> t (10)
  FlowNetwork net(4, 0, 3);
  net.add_edge(0, 1, 10.0);
  net.add_edge(0, 2, 10.0);
  net.add_edge(1, 2, 1.0);
  net.add_edge(1, 3, 10.0);
  net.add_edge(2, 3, 10.0);
  const auto result = max_flow(net);
  CHECK(result.value == Catch::Approx(20.0));
}

TEST_CASE("max_flow on an empty network is zero") {
  FlowNetwork net(2, 0, 1);
  const auto result = max_flow(net);
  CHECK(result.value == 0.0);
  CHECK(result.source_side == std::vector<bool>{true, false});
}

TEST_CASE("max_flow value equals the capacity of the returned cut") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> cap(0.0, 4.0);
  std::uniform_int_distribution<int> nodes_dist(2, 9);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = nodes_dist(rng);
    FlowNetwork net(n + 2, 0, 1);
    std::uniform_int_distribution<int> node(0, n + 1);
    for (int e = 0; e < 3 * n; ++e) {
      int u = node(rng), v = node(rng);
      if (u == v || v == 0 || u == 1) continue;
      net.add_edge(u, v, cap(rng));
    }
    const FlowNetwork original = net;
    const auto result = max_flow(net);
    CHECK(result.value == Catch::Approx(cut_capacity(original, result.source_side)).margin(1e-7));
  }
}

TEST_CASE("roof duality labels a single node") {
  PseudoBooleanFunction f(1);
  f.add_unary(0, 0.0, -2.0);
  const auto rd = solve_roof_duality(f);
  REQUIRE(rd.labels.size() == 1);
  CHECK(rd.labels[0] == Label::One);
  CHECK(rd.lower_bound == Catch::Approx(-2.0));
}

TEST_CASE("frustrated symmetric pair may be unlabeled but completes to the optimum") {
  PseudoBooleanFunction f(2);
  f.add_unary(0, 0.0, -1.0);
  f.add_unary(1, 0.0, -1.0);
  f.add_pairwise(0, 1, 0.0, 0.0, 0.0, 2.0);
  const auto rd = solve_roof_duality(f);
  const auto x = complete_labeling(f, rd.labels);
  const auto oracle = exhaustive_solve(f);
  CHECK(energy(f, x) == Catch::Approx(oracle.energy));  // both optima sit at -1
  CHECK(rd.lower_bound <= oracle.energy + 1e-9);
}

TEST_CASE("submodular instances are fully labeled and match the oracle") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> size_dist(1, 12);
  std::uniform_real_distribution<double> unary(-2.0, 2.0);
  std::uniform_real_distribution<double> cost(0.01, 2.0);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = size_dist(rng);
    PseudoBooleanFunction f(n);
    for (int i = 0; i < n; ++i) f.add_unary(i, 0.0, unary(rng));
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (density(rng) < 0.5) continue;
        const double c = cost(rng);
        f.add_pairwise(i, j, 0.0, c, c, 0.0);
      }
    }
    const auto rd = solve_roof_duality(f);
    std::vector<int> x(static_cast<std::size_t>(n));
    bool all_labeled = true;
    for (int i = 0; i < n; ++i) {
      if (rd.labels[static_cast<std::size_t>(i)] == Label::Unlabeled) all_labeled = false;
      x[static_cast<std::size_t>(i)] = rd.labels[static_cast<std::size_t>(i)] == Label::One ? 1 : 0;
    }
    REQUIRE(all_labeled);
    const auto oracle = exhaustive_solve(f);
    CHECK(energy(f, x) == Catch::Approx(oracle.energy).margin(1e-9));
    CHECK(rd.lower_bound == Catch::Approx(oracle.energy).margin(1e-7));
  }
}

TEST_CASE("completion of the roof-duality labeling reaches the optimum on general tables") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto f = oracles::random_pbf(rng, 12, /*general_tables=*/true);
    const auto rd = solve_roof_duality(f);
    const auto x = complete_labeling(f, rd.labels);
    const auto oracle = exhaustive_solve(f);
    REQUIRE(energy(f, x) == Catch::Approx(oracle.energy).margin(1e-9));
    CHECK(rd.lower_bound <= oracle.energy + 1e-7);
  }
}

TEST_CASE("persistent labels never hurt: overwriting any labeling is non-increasing") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    const auto f = oracles::random_pbf(rng, 12, /*general_tables=*/true);
    const auto rd = solve_roof_duality(f);
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<int> y = oracles::random_labeling(rng, f.n);
      std::vector<int> overwritten = y;
      for (int i = 0; i < f.n; ++i) {
        if (rd.labels[static_cast<std::size_t>(i)] != Label::Unlabeled) {
          overwritten[static_cast<std::size_t>(i)] =
              rd.labels[static_cast<std::size_t>(i)] == Label::One ? 1 : 0;
        }
      }
      CHECK(energy(f, overwritten) <= energy(f, y) + 1e-9);
    }
  }
}

TEST_CASE("complete_labeling with nothing unlabeled is the identity") {
  PseudoBooleanFunction f(3);
  f.add_unary(0, 0.0, -1.0);
  PartialLabeling partial{Label::One, Label::Zero, Label::One};
  CHECK(complete_labeling(f, partial) == std::vector<int>{1, 0, 1});
}

TEST_CASE("greedy completion assigns by conditional energy") {
  PseudoBooleanFunction f(2);
  f.add_unary(0, 0.0, -5.0);
  f.add_unary(1, 0.0, 1.0);
  PartialLabeling partial{Label::Unlabeled, Label::Unlabeled};
  const auto x = complete_labeling(f, partial, CompletionStrategy::GreedyFill);
  CHECK(x == std::vector<int>{1, 0});
}

TEST_CASE("greedy and exhaustive completion agree without pairwise terms") {
  std::mt19937_64 rng(53);
  std::uniform_int_distribution<int> size_dist(1, 10);
  std::uniform_real_distribution<double> unary(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = size_dist(rng);
    PseudoBooleanFunction f(n);
    for (int i = 0; i < n; ++i) f.add_unary(i, unary(rng), unary(rng));
    PartialLabeling partial(static_cast<std::size_t>(n), Label::Unlabeled);
    const auto greedy = complete_labeling(f, partial, CompletionStrategy::GreedyFill);
    const auto exact = complete_labeling(f, partial, CompletionStrategy::ExhaustiveFill);
    CHECK(energy(f, greedy) == Catch::Approx(energy(f, exact)).margin(1e-12));
  }
}
