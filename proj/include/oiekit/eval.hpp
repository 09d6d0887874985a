#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "oiekit/core.hpp"
#include "oiekit/ingest.hpp"
#include "oiekit/tsv.hpp"

namespace oiekit {

// Gold tuples per sentence id (no confidences).
struct GoldSet {
  std::map<std::string, std::vector<Extraction>> by_sentence;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [sid, golds] : by_sentence) n += golds.size();
    return n;
  }
};

// Gold TSV: sentence_id \t arg1 \t rel \t arg2
inline GoldSet read_gold(const std::string& path, std::vector<std::string>* malformed = nullptr) {
  GoldSet gold;
  const auto lines = read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = split_tabs(lines[ln]);
    auto bad = [&](const std::string& why) {
      if (malformed) malformed->push_back(path + ":" + std::to_string(ln + 1) + ": " + why);
    };
    if (fields.size() != 4) {
      bad("expected 4 fields, got " + std::to_string(fields.size()));
      continue;
    }
    Extraction ext;
    ext.arg1 = tokenize(fields[1]);
    ext.rel = tokenize(fields[2]);
    ext.arg2 = tokenize(fields[3]);
    ext.source = "gold";
    if (ext.arg1.empty() || ext.rel.empty()) {
      bad("empty arg1 or rel");
      continue;
    }
    gold.by_sentence[fields[0]].push_back(std::move(ext));
  }
  return gold;
}

struct PairScore {
  double precision = 0.0;
  double recall = 0.0;
};

// Slot-aligned clipped token-multiset overlap: matched tokens per slot, then
// precision over predicted tokens and recall over gold tokens.
inline PairScore match_scores(const Extraction& pred, const Extraction& gold) {
  auto slot_match = [](const std::vector<Token>& a, const std::vector<Token>& b) {
    std::unordered_map<Token, int> counts;
    for (const auto& t : b) ++counts[t];
    int matched = 0;
    for (const auto& t : a) {
      const auto it = counts.find(t);
      if (it != counts.end() && it->second > 0) {
        --it->second;
        ++matched;
      }
    }
    return matched;
  };
  const int matched = slot_match(pred.arg1, gold.arg1) + slot_match(pred.rel, gold.rel) +
                      slot_match(pred.arg2, gold.arg2);
  const double pred_total =
      static_cast<double>(pred.arg1.size() + pred.rel.size() + pred.arg2.size());
  const double gold_total =
      static_cast<double>(gold.arg1.size() + gold.rel.size() + gold.arg2.size());
  PairScore score;
  score.precision = pred_total > 0 ? matched / pred_total : 0.0;
  score.recall = gold_total > 0 ? matched / gold_total : 0.0;
  return score;
}

struct SystemPR {
  double precision = 1.0;  // convention: empty prediction set is fully precise
  double recall = 0.0;
};

// Precision: mean over predictions of the best pair precision against the
// sentence's golds. Recall: mean over golds of their assigned pair recall
// under a greedy one-to-one assignment (pairs by recall descending, each side
// used once); unmatched golds contribute 0.
inline SystemPR system_pr(const std::map<std::string, std::vector<Extraction>>& preds,
                          const GoldSet& gold) {
  double precision_sum = 0.0;
  std::size_t pred_count = 0;
  double recall_sum = 0.0;
  std::size_t gold_count = gold.total();

  for (const auto& [sid, sentence_preds] : preds) {
    const auto git = gold.by_sentence.find(sid);
    for (const auto& pred : sentence_preds) {
      ++pred_count;
      double best = 0.0;
      if (git != gold.by_sentence.end()) {
        for (const auto& g : git->second) best = std::max(best, match_scores(pred, g).precision);
      }
      precision_sum += best;
    }
    if (git == gold.by_sentence.end()) continue;

    struct Candidate {
      double recall;
      std::size_t pred_idx, gold_idx;
    };
    std::vector<Candidate> candidates;
    for (std::size_t pi = 0; pi < sentence_preds.size(); ++pi) {
      for (std::size_t gi = 0; gi < git->second.size(); ++gi) {
        const double r = match_scores(sentence_preds[pi], git->second[gi]).recall;
        if (r > 0) candidates.push_back({r, pi, gi});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.recall != b.recall) return a.recall > b.recall;
      if (a.pred_idx != b.pred_idx) return a.pred_idx < b.pred_idx;
      return a.gold_idx < b.gold_idx;
    });
    std::vector<bool> pred_used(sentence_preds.size(), false);
    std::vector<bool> gold_used(git->second.size(), false);
    for (const auto& c : candidates) {
      if (pred_used[c.pred_idx] || gold_used[c.gold_idx]) continue;
      pred_used[c.pred_idx] = true;
      gold_used[c.gold_idx] = true;
      recall_sum += c.recall;
    }
  }

  SystemPR out;
  out.precision = pred_count > 0 ? precision_sum / static_cast<double>(pred_count) : 1.0;
  out.recall = gold_count > 0 ? recall_sum / static_cast<double>(gold_count) : 0.0;
  return out;
}

struct PRPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;

  double f1() const {
    return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
};

struct PRCurve {
  std::vector<PRPoint> points;  // thresholds strictly decreasing
  double optimal_f1 = 0.0;
  double auc = 0.0;
  double last_f1 = 0.0;
};

// One point per distinct confidence, descending; predictions at or above the
// threshold are kept. Optimal F1 is the best point, Last F1 the full set, AUC
// the trapezoidal area over the measured recall range (no extrapolation).
inline PRCurve pr_curve(const std::vector<std::pair<std::string, Extraction>>& preds,
                        const GoldSet& gold) {
  if (gold.by_sentence.empty()) {
    throw std::invalid_argument("pr_curve: empty gold set");
  }
  PRCurve curve;
  std::vector<double> thresholds;
  for (const auto& [sid, ext] : preds) thresholds.push_back(ext.confidence);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  if (thresholds.empty()) {
    PRPoint point{0.0, 1.0, 0.0};
    curve.points.push_back(point);
    curve.optimal_f1 = curve.last_f1 = point.f1();
    curve.auc = 0.0;
    return curve;
  }

  for (const double tau : thresholds) {
    std::map<std::string, std::vector<Extraction>> kept;
    for (const auto& [sid, ext] : preds) {
      if (ext.confidence >= tau) kept[sid].push_back(ext);
    }
    const SystemPR pr = system_pr(kept, gold);
    curve.points.push_back({tau, pr.precision, pr.recall});
  }

  curve.optimal_f1 = 0.0;
  for (const auto& pt : curve.points) curve.optimal_f1 = std::max(curve.optimal_f1, pt.f1());
  curve.last_f1 = curve.points.back().f1();
  curve.auc = 0.0;
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    const auto& a = curve.points[i];      // smaller recall (higher threshold)
    const auto& b = curve.points[i + 1];  // larger or equal recall
    curve.auc += (b.recall - a.recall) * (a.precision + b.precision) / 2.0;
  }
  return curve;
}

// ~50 English function words excluded from the redundancy statistics.
inline const std::unordered_set<Token>& stopwords() {
  static const std::unordered_set<Token> words{
      "a",    "an",   "the",  "and",  "or",    "but",  "if",    "of",   "at",   "by",
      "for",  "with", "to",   "from", "in",    "on",   "as",    "is",   "am",   "are",
      "was",  "were", "be",   "been", "being", "it",   "its",   "this", "that", "these",
      "those", "he",  "she",  "they", "them",  "his",  "her",   "their", "we",  "you",
      "i",    "not",  "no",   "so",   "than",  "then", "there", "what", "who",  "which",
      "do",   "does", "did",  "have", "has",   "had",  "will",  "would", "can", "could"};
  return words;
}

struct RedundancyMetrics {
  double mno = 0.0;   // mean tuples-per-distinct-word, corpus-wide
  double iou = 0.0;   // mean word-set IOU over within-sentence tuple pairs
  std::size_t tuple_count = 0;
};

// Stopwords are removed before both statistics. MNO counts, for every
// distinct remaining word, how many tuples contain it, then averages over
// words. IOU averages |intersection| / |union| over all unordered tuple pairs
// within a sentence; sentences with fewer than two tuples contribute no pairs.
inline RedundancyMetrics redundancy_metrics(
    const std::map<std::string, std::vector<Extraction>>& preds_by_sentence) {
  RedundancyMetrics out;
  std::unordered_map<Token, std::size_t> tuples_containing;
  double iou_sum = 0.0;
  std::size_t pair_count = 0;

  for (const auto& [sid, tuples] : preds_by_sentence) {
    std::vector<std::set<Token>> word_sets;
    word_sets.reserve(tuples.size());
    for (const auto& ext : tuples) {
      std::set<Token> words;
      for (const auto& t : serialized_tokens(ext)) {
        if (!stopwords().count(t)) words.insert(t);
      }
      for (const auto& w : words) ++tuples_containing[w];
      word_sets.push_back(std::move(words));
      ++out.tuple_count;
    }
    for (std::size_t a = 0; a < word_sets.size(); ++a) {
      for (std::size_t b = a + 1; b < word_sets.size(); ++b) {
        std::size_t inter = 0;
        for (const auto& w : word_sets[a]) inter += word_sets[b].count(w);
        const std::size_t uni = word_sets[a].size() + word_sets[b].size() - inter;
        iou_sum += uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
        ++pair_count;
      }
    }
  }

  if (!tuples_containing.empty()) {
    double sum = 0.0;
    for (const auto& [w, cnt] : tuples_containing) sum += static_cast<double>(cnt);
    out.mno = sum / static_cast<double>(tuples_containing.size());
  }
  out.iou = pair_count > 0 ? iou_sum / static_cast<double>(pair_count) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Curve artifacts.

// CSV: one row per point, then a labeled summary block.
inline void write_curve_csv(const PRCurve& curve, const std::string& path) {
  std::vector<std::string> lines;
  lines.push_back("threshold,precision,recall,f1");
  for (const auto& pt : curve.points) {
    lines.push_back(format_double(pt.threshold) + ',' + format_double(pt.precision) + ',' +
                    format_double(pt.recall) + ',' + format_double(pt.f1()));
  }
  lines.push_back("optimal_f1,auc,last_f1");
  lines.push_back(format_double(curve.optimal_f1) + ',' + format_double(curve.auc) + ',' +
                  format_double(curve.last_f1));
  write_lines(path, lines);
}

// Minimal SVG line plot of precision against recall.
inline void write_curve_svg(const PRCurve& curve, const std::string& path) {
  const int W = 480, Hpx = 360, margin = 40;
  auto x_of = [&](double recall) { return margin + recall * (W - 2 * margin); };
  auto y_of = [&](double precision) { return Hpx - margin - precision * (Hpx - 2 * margin); };
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(W) + "\" height=\"" +
         std::to_string(Hpx) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto axis = [&](double x1, double y1, double x2, double y2) {
    svg += "<line x1=\"" + std::to_string(x1) + "\" y1=\"" + std::to_string(y1) + "\" x2=\"" +
           std::to_string(x2) + "\" y2=\"" + std::to_string(y2) +
           "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  };
  axis(margin, Hpx - margin, W - margin, Hpx - margin);
  axis(margin, Hpx - margin, margin, margin);
  svg += "<text x=\"" + std::to_string(W / 2) + "\" y=\"" + std::to_string(Hpx - 8) +
         "\" font-size=\"12\" text-anchor=\"middle\">recall</text>\n";
  svg += "<text x=\"12\" y=\"" + std::to_string(Hpx / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 12 " +
         std::to_string(Hpx / 2) + ")\">precision</text>\n";
  if (!curve.points.empty()) {
    svg += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (const auto& pt : curve.points) {
      svg += std::to_string(x_of(pt.recall)) + ',' + std::to_string(y_of(pt.precision)) + ' ';
    }
    svg += "\"/>\n";
    for (const auto& pt : curve.points) {
      svg += "<circle cx=\"" + std::to_string(x_of(pt.recall)) + "\" cy=\"" +
             std::to_string(y_of(pt.precision)) + "\" r=\"2.5\" fill=\"steelblue\"/>\n";
    }
  }
  svg += "</svg>\n";
  write_lines(path, {svg});
}

}  // namespace oiekit
