#pragma once

// Independent reference implementations used only to check the library:
// brute-force subset enumeration for the selection objective, exhaustive
// one-to-one assignment for the recall matcher, and random generators for
// property tests. None of these call the code paths they verify.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "oiekit/qpbo.hpp"
#include "oiekit/score_filter.hpp"

namespace oracles {

// Best objective sum(f) - sum(pairwise R) over all subsets, by enumeration.
inline double best_subset_objective(const std::vector<double>& f,
                                    const std::vector<std::vector<double>>& R) {
  const std::size_t n = f.size();
  double best = 0.0;  // empty subset
  for (std::uint64_t mask = 1; mask < (1ULL << n); ++mask) {
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!((mask >> i) & 1ULL)) continue;
      obj += f[i];
      for (std::size_t j = i + 1; j < n; ++j) {
        if ((mask >> j) & 1ULL) obj -= R[i][j];
      }
    }
    best = std::max(best, obj);
  }
  return best;
}

// Maximum total assigned recall over one-to-one pred/gold assignments.
inline double best_assignment_total(const std::vector<std::vector<double>>& recall) {
  const std::size_t preds = recall.size();
  if (preds == 0) return 0.0;
  const std::size_t golds = recall[0].size();
  std::vector<int> gold_ids(golds);
  for (std::size_t i = 0; i < golds; ++i) gold_ids[i] = static_cast<int>(i);
  double best = 0.0;
  // Permute golds, assign pred i to the i-th permuted gold (prefix when
  // counts differ). Small instances only.
  std::sort(gold_ids.begin(), gold_ids.end());
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < std::min(preds, golds); ++i) {
      total += recall[i][static_cast<std::size_t>(gold_ids[i])];
    }
    best = std::max(best, total);
  } while (std::next_permutation(gold_ids.begin(), gold_ids.end()));
  // When preds > golds the permutation covers which golds go to the first
  // |golds| preds; also try assignments that skip preds.
  if (preds > golds) {
    std::vector<bool> choose(preds, false);
    std::fill(choose.begin(), choose.begin() + static_cast<long>(golds), true);
    std::sort(choose.begin(), choose.end());
    do {
      std::vector<int> chosen;
      for (std::size_t i = 0; i < preds; ++i) {
        if (choose[i]) chosen.push_back(static_cast<int>(i));
      }
      std::vector<int> perm(golds);
      for (std::size_t i = 0; i < golds; ++i) perm[i] = static_cast<int>(i);
      std::sort(perm.begin(), perm.end());
      do {
        double total = 0.0;
        for (std::size_t i = 0; i < golds; ++i) {
          total += recall[static_cast<std::size_t>(chosen[i])][static_cast<std::size_t>(perm[i])];
        }
        best = std::max(best, total);
      } while (std::next_permutation(perm.begin(), perm.end()));
    } while (std::next_permutation(choose.begin(), choose.end()));
  }
  return best;
}

// Random quadratic pseudo-boolean functions. With general_tables the full
// 2x2 tables are random; otherwise only theta(1,1) is set, mirroring the
// selection translation.
inline oiekit::PseudoBooleanFunction random_pbf(std::mt19937_64& rng, int max_n,
                                                bool general_tables) {
  std::uniform_int_distribution<int> size_dist(1, max_n);
  std::uniform_real_distribution<double> unary_dist(-2.0, 2.0);
  std::uniform_real_distribution<double> pair_dist(0.0, 2.0);
  std::uniform_real_distribution<double> table_dist(-2.0, 2.0);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  const int n = size_dist(rng);
  oiekit::PseudoBooleanFunction f(n);
  for (int i = 0; i < n; ++i) f.add_unary(i, 0.0, unary_dist(rng));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (density(rng) < 0.5) continue;
      if (general_tables) {
        f.add_pairwise(i, j, table_dist(rng), table_dist(rng), table_dist(rng), table_dist(rng));
      } else {
        f.add_pairwise(i, j, 0.0, 0.0, 0.0, pair_dist(rng));
      }
    }
  }
  return f;
}

inline std::vector<int> random_labeling(std::mt19937_64& rng, int n) {
  std::vector<int> x(static_cast<std::size_t>(n));
  std::uniform_int_distribution<int> bit(0, 1);
  for (auto& v : x) v = bit(rng);
  return x;
}

// Random redundancy graph honoring the type invariants: f in [0,1],
// R symmetric in [0,1] with zero diagonal.
struct RandomGraph {
  std::vector<double> f;
  std::vector<std::vector<double>> R;
};

inline RandomGraph random_graph(std::mt19937_64& rng, int max_n) {
  std::uniform_int_distribution<int> size_dist(1, max_n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = size_dist(rng);
  RandomGraph g;
  g.f.resize(static_cast<std::size_t>(n));
  for (auto& v : g.f) v = unit(rng);
  g.R.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double r = unit(rng) < 0.3 ? 0.0 : unit(rng);
      g.R[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = r;
      g.R[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = r;
    }
  }
  return g;
}

}  // namespace oracles
