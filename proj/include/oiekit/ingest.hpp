#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "oiekit/core.hpp"
#include "oiekit/tsv.hpp"
#include "oiekit/util.hpp"

namespace oiekit {

// All extractions pooled for one sentence, exact duplicates removed.
struct ExtractionPool {
  Sentence sentence;
  std::vector<Extraction> extractions;
};

// (sentence, ordered extractions) pairs ready for training-data construction.
struct BootstrapCorpus {
  std::vector<std::pair<Sentence, std::vector<Extraction>>> pairs;
};

struct ReadReport {
  std::vector<std::string> malformed;  // one message per bad line
  bool has_confidence = true;          // false if any line left the field empty
};

struct ExtractionFile {
  std::vector<std::pair<std::string, Extraction>> rows;  // (sentence id, extraction)
  ReadReport report;
};

// Extraction TSV: sentence_id \t confidence \t arg1 \t rel \t arg2.
// Field text is tokenized (lowercased, punctuation detached); confidence is
// clamped to [0,1]; an empty confidence marks the source as unranked.
// Malformed lines are collected, not fatal; an unreadable file is.
inline ExtractionFile read_extractions(const std::string& path, const std::string& source) {
  ExtractionFile out;
  const auto lines = read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    auto bad = [&](const std::string& why) {
      out.report.malformed.push_back(path + ":" + std::to_string(ln + 1) + ": " + why);
    };
    if (fields.size() != 5) {
      bad("expected 5 fields, got " + std::to_string(fields.size()));
      continue;
    }
    Extraction ext;
    ext.source = source;
    if (fields[1].empty()) {
      out.report.has_confidence = false;
      ext.confidence = 1.0;
    } else {
      try {
        ext.confidence = std::clamp(std::stod(fields[1]), 0.0, 1.0);
      } catch (const std::exception&) {
        bad("unparseable confidence '" + fields[1] + "'");
        continue;
      }
    }
    ext.arg1 = tokenize(fields[2]);
    ext.rel = tokenize(fields[3]);
    ext.arg2 = tokenize(fields[4]);
    if (ext.arg1.empty() || ext.rel.empty()) {
      bad("empty arg1 or rel");
      continue;
    }
    out.rows.emplace_back(fields[0], std::move(ext));
  }
  return out;
}

inline void write_extractions(const std::string& path,
                              const std::vector<std::pair<std::string, Extraction>>& rows) {
  std::vector<std::string> lines;
  lines.reserve(rows.size());
  for (const auto& [sid, ext] : rows) {
    lines.push_back(sid + '\t' + format_double(ext.confidence) + '\t' + join_tokens(ext.arg1) +
                    '\t' + join_tokens(ext.rel) + '\t' + join_tokens(ext.arg2));
  }
  write_lines(path, lines);
}

// Sentence file: sentence_id \t raw text. Later duplicates of an id are
// reported and dropped.
inline std::vector<Sentence> read_sentences(const std::string& path,
                                            std::vector<std::string>* malformed = nullptr) {
  std::vector<Sentence> sentences;
  std::unordered_set<std::string> seen;
  const auto lines = read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = split_tabs(lines[ln]);
    auto bad = [&](const std::string& why) {
      if (malformed) malformed->push_back(path + ":" + std::to_string(ln + 1) + ": " + why);
    };
    if (fields.size() != 2) {
      bad("expected 2 fields, got " + std::to_string(fields.size()));
      continue;
    }
    Sentence s;
    s.id = fields[0];
    s.tokens = tokenize(fields[1]);
    if (s.id.empty() || s.tokens.empty()) {
      bad("empty id or sentence");
      continue;
    }
    if (!seen.insert(s.id).second) {
      bad("duplicate sentence id '" + s.id + "'");
      continue;
    }
    sentences.push_back(std::move(s));
  }
  return sentences;
}

struct PoolingResult {
  std::vector<ExtractionPool> pools;  // sentence file order
  std::size_t duplicates_removed = 0;
  std::size_t orphan_extractions = 0;  // rows whose sentence id has no sentence
};

// Merges per-source extraction rows into per-sentence pools. Sources must be
// given in rank order (earlier = higher rank); exact duplicates keep the
// first occurrence by (source rank, file order).
inline PoolingResult pool_extractions(
    const std::vector<Sentence>& sentences,
    const std::vector<std::vector<std::pair<std::string, Extraction>>>& per_source_rows) {
  PoolingResult result;
  std::unordered_map<std::string, std::size_t> index;
  result.pools.reserve(sentences.size());
  for (const auto& s : sentences) {
    index.emplace(s.id, result.pools.size());
    result.pools.push_back({s, {}});
  }
  std::unordered_map<std::string, std::unordered_set<std::string>> seen_keys;
  for (const auto& rows : per_source_rows) {
    for (const auto& [sid, ext] : rows) {
      const auto it = index.find(sid);
      if (it == index.end()) {
        ++result.orphan_extractions;
        continue;
      }
      if (!seen_keys[sid].insert(extraction_key(ext)).second) {
        ++result.duplicates_removed;
        continue;
      }
      result.pools[it->second].extractions.push_back(ext);
    }
  }
  return result;
}

// Confidence-descending order when the source provides confidences, file
// order otherwise. The sort is stable: ties keep their original order.
inline std::vector<Extraction> order_for_bootstrap(std::vector<Extraction> exts,
                                                   bool has_confidence) {
  if (has_confidence) {
    std::stable_sort(exts.begin(), exts.end(), [](const Extraction& a, const Extraction& b) {
      return a.confidence > b.confidence;
    });
  }
  return exts;
}

struct BootstrapResult {
  BootstrapCorpus corpus;
  std::size_t skipped_sentences = 0;  // sentences with no extractions
};

// Picks, per sentence, one source uniformly among the sources present for
// that sentence and keeps all of that source's extractions. The choice is a
// pure function of (seed, sentence id), so corpora are reproducible and
// independent of iteration order. source_rank orders the candidates; sources
// not listed come after, alphabetically. has_confidence controls per-source
// ordering of the kept extractions.
inline BootstrapResult build_random_bootstrap(
    const std::vector<ExtractionPool>& pools, std::uint64_t seed,
    const std::vector<std::string>& source_rank = {},
    const std::map<std::string, bool>& has_confidence = {}) {
  BootstrapResult result;
  auto rank_of = [&](const std::string& source) {
    for (std::size_t r = 0; r < source_rank.size(); ++r) {
      if (source_rank[r] == source) return static_cast<int>(r);
    }
    return static_cast<int>(source_rank.size());
  };
  for (const auto& pool : pools) {
    if (pool.extractions.empty()) {
      ++result.skipped_sentences;
      continue;
    }
    std::vector<std::string> present;
    for (const auto& ext : pool.extractions) {
      if (std::find(present.begin(), present.end(), ext.source) == present.end()) {
        present.push_back(ext.source);
      }
    }
    std::stable_sort(present.begin(), present.end(), [&](const std::string& a, const std::string& b) {
      const int ra = rank_of(a), rb = rank_of(b);
      if (ra != rb) return ra < rb;
      return a < b;
    });
    const std::uint64_t h = splitmix64(seed ^ fnv1a64(pool.sentence.id));
    const std::string& chosen = present[h % present.size()];
    std::vector<Extraction> kept;
    for (const auto& ext : pool.extractions) {
      if (ext.source == chosen) kept.push_back(ext);
    }
    const auto hc = has_confidence.find(chosen);
    kept = order_for_bootstrap(std::move(kept), hc == has_confidence.end() ? true : hc->second);
    result.corpus.pairs.emplace_back(pool.sentence, std::move(kept));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Pooled-corpus file: the 5-column extraction format plus a trailing source
// column, so one file can carry a multi-system pool.

inline void write_pooled(const std::string& path, const std::vector<ExtractionPool>& pools) {
  std::vector<std::string> lines;
  for (const auto& pool : pools) {
    for (const auto& ext : pool.extractions) {
      lines.push_back(pool.sentence.id + '\t' + format_double(ext.confidence) + '\t' +
                      join_tokens(ext.arg1) + '\t' + join_tokens(ext.rel) + '\t' +
                      join_tokens(ext.arg2) + '\t' + ext.source);
    }
  }
  write_lines(path, lines);
}

inline std::vector<ExtractionPool> read_pooled(const std::string& path,
                                               const std::vector<Sentence>& sentences,
                                               std::vector<std::string>* malformed = nullptr) {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<ExtractionPool> pools;
  pools.reserve(sentences.size());
  for (const auto& s : sentences) {
    index.emplace(s.id, pools.size());
    pools.push_back({s, {}});
  }
  const auto lines = read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = split_tabs(lines[ln]);
    auto bad = [&](const std::string& why) {
      if (malformed) malformed->push_back(path + ":" + std::to_string(ln + 1) + ": " + why);
    };
    if (fields.size() != 6) {
      bad("expected 6 fields, got " + std::to_string(fields.size()));
      continue;
    }
    Extraction ext;
    try {
      ext.confidence = std::clamp(std::stod(fields[1]), 0.0, 1.0);
    } catch (const std::exception&) {
      bad("unparseable confidence '" + fields[1] + "'");
      continue;
    }
    ext.arg1 = tokenize(fields[2]);
    ext.rel = tokenize(fields[3]);
    ext.arg2 = tokenize(fields[4]);
    ext.source = fields[5];
    if (ext.arg1.empty() || ext.rel.empty() || ext.source.empty()) {
      bad("empty arg1, rel, or source");
      continue;
    }
    const auto it = index.find(fields[0]);
    if (it == index.end()) {
      bad("unknown sentence id '" + fields[0] + "'");
      continue;
    }
    pools[it->second].extractions.push_back(std::move(ext));
  }
  return pools;
}

}  // namespace oiekit
