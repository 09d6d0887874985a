#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oiekit {

// Quadratic pseudo-boolean function over x in {0,1}^n:
//   E(x) = constant + sum_i unary[i][x_i] + sum_{i<j} pairwise[(i,j)][2*x_i+x_j]
struct PseudoBooleanFunction {
  int n = 0;
  std::vector<std::array<double, 2>> unary;                       // theta_i(0), theta_i(1)
  std::map<std::pair<int, int>, std::array<double, 4>> pairwise;  // (i<j) -> theta(00,01,10,11)
  double constant = 0.0;

  explicit PseudoBooleanFunction(int node_count = 0)
      : n(node_count), unary(static_cast<std::size_t>(node_count), {0.0, 0.0}) {}

  void add_unary(int i, double theta0, double theta1) {
    unary.at(static_cast<std::size_t>(i))[0] += theta0;
    unary.at(static_cast<std::size_t>(i))[1] += theta1;
  }

  void add_pairwise(int i, int j, double t00, double t01, double t10, double t11) {
    if (i == j || i < 0 || j < 0 || i >= n || j >= n) {
      throw std::invalid_argument("add_pairwise: bad node pair");
    }
    if (i > j) {
      std::swap(i, j);
      std::swap(t01, t10);
    }
    auto& tbl = pairwise[{i, j}];
    tbl[0] += t00;
    tbl[1] += t01;
    tbl[2] += t10;
    tbl[3] += t11;
  }
};

inline double energy(const PseudoBooleanFunction& f, const std::vector<int>& x) {
  if (static_cast<int>(x.size()) != f.n) {
    throw std::invalid_argument("energy: labeling length does not match node count");
  }
  double e = f.constant;
  for (int i = 0; i < f.n; ++i) e += f.unary[static_cast<std::size_t>(i)][x[static_cast<std::size_t>(i)]];
  for (const auto& [ij, tbl] : f.pairwise) {
    e += tbl[static_cast<std::size_t>(2 * x[static_cast<std::size_t>(ij.first)] +
                                      x[static_cast<std::size_t>(ij.second)])];
  }
  return e;
}

struct ExhaustiveResult {
  std::vector<int> labeling;
  double energy = 0.0;
};

// Enumerates all 2^n labelings with x_0 as the least-significant bit; the
// first minimum wins ties. Guarded to n <= 25.
inline ExhaustiveResult exhaustive_solve(const PseudoBooleanFunction& f) {
  if (f.n > 25) throw std::invalid_argument("exhaustive_solve: n > 25");
  ExhaustiveResult best;
  best.labeling.assign(static_cast<std::size_t>(f.n), 0);
  best.energy = energy(f, best.labeling);
  std::vector<int> x(static_cast<std::size_t>(f.n), 0);
  const std::uint64_t total = 1ULL << f.n;
  for (std::uint64_t mask = 1; mask < total; ++mask) {
    for (int k = 0; k < f.n; ++k) {
      x[static_cast<std::size_t>(k)] = static_cast<int>((mask >> k) & 1ULL);
    }
    const double e = energy(f, x);
    if (e < best.energy) {
      best.energy = e;
      best.labeling = x;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Max-flow (Dinic) on real capacities.

struct FlowNetwork {
  struct Arc {
    int from = 0;
    int to = 0;
    double capacity = 0.0;  // residual capacity
    int rev = 0;            // index of the paired reverse arc
  };

  int node_count = 0;
  int source = 0;
  int sink = 0;
  std::vector<Arc> arcs;
  std::vector<std::vector<int>> adj;

  FlowNetwork(int nodes, int src, int snk)
      : node_count(nodes), source(src), sink(snk), adj(static_cast<std::size_t>(nodes)) {}

  void add_edge(int u, int v, double cap) {
    if (cap < 0) throw std::invalid_argument("add_edge: negative capacity");
    const int a = static_cast<int>(arcs.size());
    arcs.push_back({u, v, cap, a + 1});
    arcs.push_back({v, u, 0.0, a});
    adj[static_cast<std::size_t>(u)].push_back(a);
    adj[static_cast<std::size_t>(v)].push_back(a + 1);
  }
};

struct MaxFlowResult {
  double value = 0.0;
  std::vector<bool> source_side;  // reachable from source in the residual graph
};

namespace detail {

inline constexpr double kFlowEps = 1e-9;

inline bool dinic_bfs(const FlowNetwork& net, std::vector<int>& level) {
  std::fill(level.begin(), level.end(), -1);
  level[static_cast<std::size_t>(net.source)] = 0;
  std::deque<int> queue{net.source};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int ai : net.adj[static_cast<std::size_t>(u)]) {
      const auto& arc = net.arcs[static_cast<std::size_t>(ai)];
      if (arc.capacity > kFlowEps && level[static_cast<std::size_t>(arc.to)] < 0) {
        level[static_cast<std::size_t>(arc.to)] = level[static_cast<std::size_t>(u)] + 1;
        queue.push_back(arc.to);
      }
    }
  }
  return level[static_cast<std::size_t>(net.sink)] >= 0;
}

inline double dinic_dfs(FlowNetwork& net, std::vector<int>& level, std::vector<std::size_t>& iter,
                        int u, double pushed) {
  if (u == net.sink) return pushed;
  auto& edges = net.adj[static_cast<std::size_t>(u)];
  for (auto& i = iter[static_cast<std::size_t>(u)]; i < edges.size(); ++i) {
    const int ai = edges[i];
    auto& arc = net.arcs[static_cast<std::size_t>(ai)];
    if (arc.capacity > kFlowEps &&
        level[static_cast<std::size_t>(arc.to)] == level[static_cast<std::size_t>(u)] + 1) {
      const double got = dinic_dfs(net, level, iter, arc.to, std::min(pushed, arc.capacity));
      if (got > kFlowEps) {
        arc.capacity -= got;
        net.arcs[static_cast<std::size_t>(arc.rev)].capacity += got;
        return got;
      }
    }
  }
  return 0.0;
}

}  // namespace detail

// Exact max-flow within absolute tolerance 1e-9; cut sides from BFS on the
// residual graph starting at the source.
inline MaxFlowResult max_flow(FlowNetwork net) {
  MaxFlowResult result;
  std::vector<int> level(static_cast<std::size_t>(net.node_count), -1);
  std::vector<std::size_t> iter(static_cast<std::size_t>(net.node_count), 0);
  if (net.source != net.sink) {
    while (detail::dinic_bfs(net, level)) {
      std::fill(iter.begin(), iter.end(), 0);
      while (true) {
        const double pushed = detail::dinic_dfs(net, level, iter, net.source,
                                                std::numeric_limits<double>::infinity());
        if (pushed <= detail::kFlowEps) break;
        result.value += pushed;
      }
    }
  }
  result.source_side.assign(static_cast<std::size_t>(net.node_count), false);
  std::deque<int> queue{net.source};
  result.source_side[static_cast<std::size_t>(net.source)] = true;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int ai : net.adj[static_cast<std::size_t>(u)]) {
      const auto& arc = net.arcs[static_cast<std::size_t>(ai)];
      if (arc.capacity > detail::kFlowEps && !result.source_side[static_cast<std::size_t>(arc.to)]) {
        result.source_side[static_cast<std::size_t>(arc.to)] = true;
        queue.push_back(arc.to);
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Roof duality.

enum class Label : std::uint8_t { Zero = 0, One = 1, Unlabeled = 2 };

using PartialLabeling = std::vector<Label>;

struct RoofDualityResult {
  PartialLabeling labels;
  double lower_bound = 0.0;  // constant + max-flow value
};

namespace detail {

// Builder for the doubled (literal/complement) network. Literal node k < n is
// x_k; node k >= n is the complement of x_{k-n}. Unary weights accumulate as
// (cost at literal=0, cost at literal=1) and are normalized into source/sink
// arcs at the end.
struct RoofDualityBuilder {
  int n;
  std::vector<double> w0, w1;
  std::vector<std::array<int, 3>> pair_arcs;  // literal a -> literal b, stored cap later
  std::vector<double> pair_caps;
  double constant = 0.0;

  explicit RoofDualityBuilder(int nodes)
      : n(nodes), w0(static_cast<std::size_t>(2 * nodes), 0.0), w1(static_cast<std::size_t>(2 * nodes), 0.0) {}

  int complement(int lit) const { return lit < n ? lit + n : lit - n; }

  // Adds half of a submodular table t on literal pair (a, b), plus the
  // mirrored half on the complements. Decomposition:
  //   t = t00 + (t10-t00)[La=1] + (t11-t10)[Lb=1] + beta[La=0 & Lb=1]
  // with beta = t01+t10-t00-t11 >= 0 turning into an arc a->b.
  void add_submodular_pair(int a, int b, const std::array<double, 4>& t) {
    const double beta = t[1] + t[2] - t[0] - t[3];
    w1[static_cast<std::size_t>(a)] += (t[2] - t[0]) / 2.0;
    w1[static_cast<std::size_t>(b)] += (t[3] - t[2]) / 2.0;
    if (beta > 0) {
      pair_arcs.push_back({a, b, 0});
      pair_caps.push_back(beta / 2.0);
    }
    constant += t[0] / 2.0;

    // Mirror on complements with the 180-degree rotated table.
    const std::array<double, 4> r{t[3], t[2], t[1], t[0]};
    const int ca = complement(a);
    const int cb = complement(b);
    w1[static_cast<std::size_t>(ca)] += (r[2] - r[0]) / 2.0;
    w1[static_cast<std::size_t>(cb)] += (r[3] - r[2]) / 2.0;
    if (beta > 0) {
      pair_arcs.push_back({ca, cb, 0});
      pair_caps.push_back(beta / 2.0);
    }
    constant += r[0] / 2.0;
  }
};

}  // namespace detail

// Roof-duality relaxation via max-flow on the doubled network. Each variable
// gets a literal node and a complement node; non-submodular terms couple a
// literal with the other variable's complement. A variable is labeled when
// its two copies land on opposite sides of the min cut; labeled variables
// satisfy weak persistency (some optimal labeling agrees with all of them).
inline RoofDualityResult solve_roof_duality(const PseudoBooleanFunction& f) {
  detail::RoofDualityBuilder builder(f.n);

  for (int i = 0; i < f.n; ++i) {
    const auto& u = f.unary[static_cast<std::size_t>(i)];
    builder.w0[static_cast<std::size_t>(i)] += u[0] / 2.0;
    builder.w1[static_cast<std::size_t>(i)] += u[1] / 2.0;
    builder.w0[static_cast<std::size_t>(i + f.n)] += u[1] / 2.0;
    builder.w1[static_cast<std::size_t>(i + f.n)] += u[0] / 2.0;
  }

  for (const auto& [ij, t] : f.pairwise) {
    const auto [i, j] = ij;
    const double beta = t[1] + t[2] - t[0] - t[3];
    if (beta >= 0) {
      builder.add_submodular_pair(i, j, t);
    } else {
      // Swap the columns: the term is submodular in (x_i, complement of x_j).
      builder.add_submodular_pair(i, j + f.n, {t[1], t[0], t[3], t[2]});
    }
  }

  // Node layout: 0 = source, 1 = sink, 2 + lit for literal nodes.
  FlowNetwork net(2 * f.n + 2, 0, 1);
  double constant = builder.constant + f.constant;
  for (int lit = 0; lit < 2 * f.n; ++lit) {
    const double m = std::min(builder.w0[static_cast<std::size_t>(lit)],
                              builder.w1[static_cast<std::size_t>(lit)]);
    constant += m;
    const double to_one = builder.w1[static_cast<std::size_t>(lit)] - m;   // paid when literal = 1
    const double to_zero = builder.w0[static_cast<std::size_t>(lit)] - m;  // paid when literal = 0
    if (to_one > 0) net.add_edge(0, 2 + lit, to_one);
    if (to_zero > 0) net.add_edge(2 + lit, 1, to_zero);
  }
  for (std::size_t k = 0; k < builder.pair_arcs.size(); ++k) {
    net.add_edge(2 + builder.pair_arcs[k][0], 2 + builder.pair_arcs[k][1], builder.pair_caps[k]);
  }

  const MaxFlowResult flow = max_flow(std::move(net));

  RoofDualityResult result;
  result.lower_bound = constant + flow.value;
  result.labels.assign(static_cast<std::size_t>(f.n), Label::Unlabeled);
  for (int i = 0; i < f.n; ++i) {
    // Literal = 1 iff its node ends on the sink side of the cut.
    const bool lit = !flow.source_side[static_cast<std::size_t>(2 + i)];
    const bool comp = !flow.source_side[static_cast<std::size_t>(2 + f.n + i)];
    if (lit != comp) {
      result.labels[static_cast<std::size_t>(i)] = lit ? Label::One : Label::Zero;
    }
  }
  return result;
}

enum class CompletionStrategy { AutoSelect, ExhaustiveFill, GreedyFill };

namespace detail {

inline std::vector<int> greedy_fill(const PseudoBooleanFunction& f, const PartialLabeling& partial,
                                    const std::vector<int>& unlabeled) {
  std::vector<int> x(static_cast<std::size_t>(f.n), 0);
  for (int i = 0; i < f.n; ++i) {
    if (partial[static_cast<std::size_t>(i)] == Label::One) x[static_cast<std::size_t>(i)] = 1;
  }
  // Adjacency over pairwise terms for conditional deltas.
  std::vector<std::vector<std::pair<int, const std::array<double, 4>*>>> nbr(
      static_cast<std::size_t>(f.n));
  for (const auto& [ij, tbl] : f.pairwise) {
    nbr[static_cast<std::size_t>(ij.first)].push_back({ij.second, &tbl});
    nbr[static_cast<std::size_t>(ij.second)].push_back({ij.first, &tbl});
  }
  std::vector<int> order = unlabeled;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double da = std::abs(f.unary[static_cast<std::size_t>(a)][0] - f.unary[static_cast<std::size_t>(a)][1]);
    const double db = std::abs(f.unary[static_cast<std::size_t>(b)][0] - f.unary[static_cast<std::size_t>(b)][1]);
    if (da != db) return da > db;
    return a < b;
  });
  for (int i : order) {
    double cost0 = f.unary[static_cast<std::size_t>(i)][0];
    double cost1 = f.unary[static_cast<std::size_t>(i)][1];
    for (const auto& [j, tbl] : nbr[static_cast<std::size_t>(i)]) {
      const int xj = x[static_cast<std::size_t>(j)];
      if (j > i) {
        cost0 += (*tbl)[static_cast<std::size_t>(xj)];
        cost1 += (*tbl)[static_cast<std::size_t>(2 + xj)];
      } else {
        cost0 += (*tbl)[static_cast<std::size_t>(2 * xj)];
        cost1 += (*tbl)[static_cast<std::size_t>(2 * xj + 1)];
      }
    }
    x[static_cast<std::size_t>(i)] = cost1 < cost0 ? 1 : 0;
  }
  return x;
}

inline std::vector<int> exhaustive_fill(const PseudoBooleanFunction& f,
                                        const PartialLabeling& partial,
                                        const std::vector<int>& unlabeled) {
  if (unlabeled.size() > 25) {
    throw std::invalid_argument("complete_labeling: too many unlabeled nodes for exhaustive fill");
  }
  std::vector<int> x(static_cast<std::size_t>(f.n), 0);
  for (int i = 0; i < f.n; ++i) {
    if (partial[static_cast<std::size_t>(i)] == Label::One) x[static_cast<std::size_t>(i)] = 1;
  }
  std::vector<int> best = x;
  for (int i : unlabeled) best[static_cast<std::size_t>(i)] = 0;
  double best_energy = energy(f, best);
  const std::uint64_t total = 1ULL << unlabeled.size();
  for (std::uint64_t mask = 1; mask < total; ++mask) {
    for (std::size_t k = 0; k < unlabeled.size(); ++k) {
      x[static_cast<std::size_t>(unlabeled[k])] = static_cast<int>((mask >> k) & 1ULL);
    }
    const double e = energy(f, x);
    if (e < best_energy) {
      best_energy = e;
      best = x;
    }
  }
  return best;
}

}  // namespace detail

// Fills in unlabeled nodes: exhaustively when at most 20 remain (exact, ties
// resolved like exhaustive_solve), greedily by descending unary margin
// otherwise.
inline std::vector<int> complete_labeling(const PseudoBooleanFunction& f,
                                          const PartialLabeling& partial,
                                          CompletionStrategy strategy = CompletionStrategy::AutoSelect) {
  if (static_cast<int>(partial.size()) != f.n) {
    throw std::invalid_argument("complete_labeling: partial labeling length mismatch");
  }
  std::vector<int> unlabeled;
  for (int i = 0; i < f.n; ++i) {
    if (partial[static_cast<std::size_t>(i)] == Label::Unlabeled) unlabeled.push_back(i);
  }
  if (unlabeled.empty()) {
    std::vector<int> x(static_cast<std::size_t>(f.n), 0);
    for (int i = 0; i < f.n; ++i) {
      if (partial[static_cast<std::size_t>(i)] == Label::One) x[static_cast<std::size_t>(i)] = 1;
    }
    return x;
  }
  switch (strategy) {
    case CompletionStrategy::ExhaustiveFill:
      return detail::exhaustive_fill(f, partial, unlabeled);
    case CompletionStrategy::GreedyFill:
      return detail::greedy_fill(f, partial, unlabeled);
    case CompletionStrategy::AutoSelect:
    default:
      if (unlabeled.size() <= 20) return detail::exhaustive_fill(f, partial, unlabeled);
      return detail::greedy_fill(f, partial, unlabeled);
  }
}

}  // namespace oiekit
