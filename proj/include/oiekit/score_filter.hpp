#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "oiekit/core.hpp"
#include "oiekit/ingest.hpp"
#include "oiekit/qpbo.hpp"
#include "oiekit/util.hpp"

namespace oiekit {

// Bigram-overlap F1 between two token sequences, with clipped multiset
// matching. Falls back to unigram F1 when either side has fewer than two
// tokens. Symmetric; 0 when there is nothing to match.
inline double rouge2(const std::vector<Token>& a, const std::vector<Token>& b) {
  auto ngram_counts = [](const std::vector<Token>& seq, std::size_t n) {
    std::unordered_map<std::string, int> counts;
    if (seq.size() >= n) {
      for (std::size_t i = 0; i + n <= seq.size(); ++i) {
        std::string key = seq[i];
        for (std::size_t k = 1; k < n; ++k) {
          key.push_back('\x1f');
          key += seq[i + k];
        }
        ++counts[key];
      }
    }
    return counts;
  };
  const std::size_t n = (a.size() < 2 || b.size() < 2) ? 1 : 2;
  const auto ca = ngram_counts(a, n);
  const auto cb = ngram_counts(b, n);
  if (ca.empty() || cb.empty()) return 0.0;
  double matched = 0;
  double total_a = 0;
  for (const auto& [key, cnt] : ca) {
    total_a += cnt;
    const auto it = cb.find(key);
    if (it != cb.end()) matched += std::min(cnt, it->second);
  }
  double total_b = 0;
  for (const auto& [key, cnt] : cb) total_b += cnt;
  const double p = matched / total_a;
  const double r = matched / total_b;
  if (p + r <= 0) return 0.0;
  return 2 * p * r / (p + r);
}

// Scores one extraction against its sentence; all implementations return
// values in [0,1] and are safe for concurrent read-only use.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const Sentence& sentence, const Extraction& ext) const = 0;
};

// Rank-normalized source confidence: the extraction at rank r of m within its
// (sentence, source) group scores 1 - r/(m+1), ranks taken confidence-
// descending (stable) when the source carries confidences, file order
// otherwise.
class RankScorer : public Scorer {
 public:
  RankScorer(const std::vector<ExtractionPool>& pools,
             const std::map<std::string, bool>& has_confidence = {}) {
    for (const auto& pool : pools) {
      std::vector<std::string> sources;
      for (const auto& ext : pool.extractions) {
        if (std::find(sources.begin(), sources.end(), ext.source) == sources.end()) {
          sources.push_back(ext.source);
        }
      }
      for (const auto& source : sources) {
        std::vector<const Extraction*> group;
        for (const auto& ext : pool.extractions) {
          if (ext.source == source) group.push_back(&ext);
        }
        const auto hc = has_confidence.find(source);
        if (hc == has_confidence.end() || hc->second) {
          std::stable_sort(group.begin(), group.end(), [](const Extraction* a, const Extraction* b) {
            return a->confidence > b->confidence;
          });
        }
        const double m = static_cast<double>(group.size());
        for (std::size_t r = 0; r < group.size(); ++r) {
          scores_[key(pool.sentence.id, *group[r])] = 1.0 - static_cast<double>(r + 1) / (m + 1.0);
        }
      }
    }
  }

  double score(const Sentence& sentence, const Extraction& ext) const override {
    const auto it = scores_.find(key(sentence.id, ext));
    return it == scores_.end() ? 0.0 : it->second;
  }

 private:
  static std::string key(const std::string& sid, const Extraction& ext) {
    return sid + '\x1d' + ext.source + '\x1d' + extraction_key(ext);
  }
  std::unordered_map<std::string, double> scores_;
};

// Passthrough of precomputed scores keyed by (sentence id, slot tokens).
// Unknown extractions score 0 and are counted.
class ExternalScorer : public Scorer {
 public:
  ExternalScorer() = default;
  ExternalScorer(ExternalScorer&& other) noexcept
      : scores_(std::move(other.scores_)), misses_(other.misses_.load()) {}
  ExternalScorer& operator=(ExternalScorer&& other) noexcept {
    scores_ = std::move(other.scores_);
    misses_ = other.misses_.load();
    return *this;
  }

  // Score file: sentence_id \t arg1 \t rel \t arg2 \t score
  static ExternalScorer from_file(const std::string& path,
                                  std::vector<std::string>* malformed = nullptr) {
    ExternalScorer scorer;
    const auto lines = read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (lines[ln].empty()) continue;
      const auto fields = split_tabs(lines[ln]);
      auto bad = [&](const std::string& why) {
        if (malformed) malformed->push_back(path + ":" + std::to_string(ln + 1) + ": " + why);
      };
      if (fields.size() != 5) {
        bad("expected 5 fields, got " + std::to_string(fields.size()));
        continue;
      }
      Extraction ext;
      ext.arg1 = tokenize(fields[1]);
      ext.rel = tokenize(fields[2]);
      ext.arg2 = tokenize(fields[3]);
      double value = 0.0;
      try {
        value = std::clamp(std::stod(fields[4]), 0.0, 1.0);
      } catch (const std::exception&) {
        bad("unparseable score '" + fields[4] + "'");
        continue;
      }
      scorer.add(fields[0], ext, value);
    }
    return scorer;
  }

  void add(const std::string& sid, const Extraction& ext, double value) {
    scores_[sid + '\x1d' + extraction_key(ext)] = std::clamp(value, 0.0, 1.0);
  }

  double score(const Sentence& sentence, const Extraction& ext) const override {
    const auto it = scores_.find(sentence.id + '\x1d' + extraction_key(ext));
    if (it == scores_.end()) {
      ++misses_;
      return 0.0;
    }
    return it->second;
  }

  std::size_t misses() const { return misses_.load(); }

 private:
  std::unordered_map<std::string, double> scores_;
  mutable std::atomic<std::size_t> misses_{0};
};

// Node scores f and the symmetric redundancy matrix R over one sentence's
// pooled extractions.
struct RedundancyGraph {
  std::vector<Extraction> nodes;
  std::vector<double> f;
  std::vector<std::vector<double>> R;
};

// f[i] from the scorer (scorer failures score 0 and are counted in
// *warnings); R[j][k] = rouge2 of the serialized tuples, zero diagonal.
inline RedundancyGraph build_graph(const ExtractionPool& pool, const Scorer& scorer,
                                   std::size_t* warnings = nullptr) {
  RedundancyGraph g;
  g.nodes = pool.extractions;
  const std::size_t n = g.nodes.size();
  g.f.resize(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      g.f[i] = std::clamp(scorer.score(pool.sentence, g.nodes[i]), 0.0, 1.0);
    } catch (const std::exception&) {
      g.f[i] = 0.0;
      if (warnings) ++*warnings;
    }
  }
  std::vector<std::vector<Token>> serialized(n);
  for (std::size_t i = 0; i < n; ++i) serialized[i] = serialized_tokens(g.nodes[i]);
  g.R.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = j + 1; k < n; ++k) {
      const double r = rouge2(serialized[j], serialized[k]);
      g.R[j][k] = r;
      g.R[k][j] = r;
    }
  }
  return g;
}

// Objective of a selected index set: sum of f over members minus R over
// member pairs, each unordered pair counted once.
inline double selection_objective(const RedundancyGraph& g, const std::vector<std::size_t>& sel) {
  double obj = 0.0;
  for (std::size_t a = 0; a < sel.size(); ++a) {
    obj += g.f[sel[a]];
    for (std::size_t b = a + 1; b < sel.size(); ++b) obj -= g.R[sel[a]][sel[b]];
  }
  return obj;
}

// Maximizes sum f(i) - sum_{j<k} R[j][k] over subsets by translating to a
// pseudo-boolean minimization (theta_i(1) = -f[i], theta_jk(1,1) = R[j][k])
// solved with roof duality plus completion. Returns selected indices in pool
// order; zero-gain nodes are excluded.
inline std::vector<std::size_t> select_subset_indices(const RedundancyGraph& g) {
  const int n = static_cast<int>(g.nodes.size());
  PseudoBooleanFunction f(n);
  for (int i = 0; i < n; ++i) f.add_unary(i, 0.0, -g.f[static_cast<std::size_t>(i)]);
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      const double r = g.R[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
      if (r != 0.0) f.add_pairwise(j, k, 0.0, 0.0, 0.0, r);
    }
  }
  const RoofDualityResult rd = solve_roof_duality(f);
  const std::vector<int> x = complete_labeling(f, rd.labels);
  std::vector<std::size_t> selected;
  for (int i = 0; i < n; ++i) {
    if (x[static_cast<std::size_t>(i)] == 1) selected.push_back(static_cast<std::size_t>(i));
  }
  return selected;
}

inline std::vector<Extraction> select_subset(const RedundancyGraph& g) {
  std::vector<Extraction> out;
  for (std::size_t i : select_subset_indices(g)) out.push_back(g.nodes[i]);
  return out;
}

struct ScoredSelection {
  Sentence sentence;
  std::vector<Extraction> selected;  // model-score descending, confidence = f
  double objective = 0.0;
};

struct ScoreFilterResult {
  std::vector<ScoredSelection> selections;
  std::size_t scorer_warnings = 0;
};

// Per-sentence build_graph + select_subset; the kept extractions are
// re-ranked by score descending (stable) so downstream training-order
// construction sees the aggregator's confidence order.
inline ScoreFilterResult score_and_filter(const std::vector<ExtractionPool>& pools,
                                          const Scorer& scorer, int jobs = 1) {
  ScoreFilterResult result;
  result.selections.resize(pools.size());
  std::vector<std::size_t> warnings(pools.size(), 0);
  parallel_for(pools.size(), jobs, [&](std::size_t i) {
    const RedundancyGraph g = build_graph(pools[i], scorer, &warnings[i]);
    const auto indices = select_subset_indices(g);
    ScoredSelection sel;
    sel.sentence = pools[i].sentence;
    sel.objective = selection_objective(g, indices);
    std::vector<std::size_t> order = indices;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return g.f[a] > g.f[b]; });
    for (std::size_t idx : order) {
      Extraction ext = g.nodes[idx];
      ext.confidence = g.f[idx];
      ext.source = "aggregated";
      sel.selected.push_back(std::move(ext));
    }
    result.selections[i] = std::move(sel);
  });
  for (std::size_t w : warnings) result.scorer_warnings += w;
  return result;
}

}  // namespace oiekit
