#pragma once

#include <string>
#include <vector>

#include "oiekit/core.hpp"
#include "oiekit/tsv.hpp"

namespace oiekit {

struct TrainingInstance {
  std::vector<Token> input;   // serialized memory input, starts with [CLS]
  std::vector<Token> target;  // linearized extraction, or the end symbol
};

// One instance per extraction (input = sentence plus the extractions before
// it, target = the extraction) plus a closing instance whose target is the
// end-of-extractions symbol: always |exts| + 1 instances. Inputs are capped
// at max_input_len tokens by dropping trailing extractions from the memory;
// targets are never dropped.
inline std::vector<TrainingInstance> build_instances(const Sentence& sentence,
                                                     const std::vector<Extraction>& exts,
                                                     std::size_t max_input_len = 300) {
  std::vector<std::vector<Token>> linearized;
  linearized.reserve(exts.size());
  for (const auto& ext : exts) linearized.push_back(linearize(ext));

  std::vector<Token> memory;
  memory.push_back(symbols::kCls);
  memory.insert(memory.end(), sentence.tokens.begin(), sentence.tokens.end());

  std::vector<TrainingInstance> instances;
  instances.reserve(exts.size() + 1);
  for (std::size_t k = 0; k < exts.size(); ++k) {
    instances.push_back({memory, linearized[k]});
    if (memory.size() + 1 + linearized[k].size() <= max_input_len) {
      memory.push_back(symbols::kSep);
      memory.insert(memory.end(), linearized[k].begin(), linearized[k].end());
    }
  }
  instances.push_back({memory, {symbols::kEndOfExtractions}});
  return instances;
}

// Training-instance TSV: space-joined input \t space-joined target.
inline void write_instances(const std::string& path, const std::vector<TrainingInstance>& instances) {
  std::vector<std::string> lines;
  lines.reserve(instances.size());
  for (const auto& inst : instances) {
    lines.push_back(join_tokens(inst.input) + '\t' + join_tokens(inst.target));
  }
  write_lines(path, lines);
}

// Instance files hold already-tokenized text (reserved symbols included), so
// reading splits on spaces without re-tokenizing.
inline std::vector<Token> split_space_tokens(const std::string& text) {
  std::vector<Token> tokens;
  std::string cur;
  for (char c : text) {
    if (c == ' ') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline std::vector<TrainingInstance> read_instances(const std::string& path) {
  std::vector<TrainingInstance> instances;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2) throw IoError("bad training instance line in " + path);
    TrainingInstance inst;
    inst.input = split_space_tokens(fields[0]);
    inst.target = split_space_tokens(fields[1]);
    if (inst.input.empty() || inst.target.empty()) throw IoError("empty instance in " + path);
    instances.push_back(std::move(inst));
  }
  return instances;
}

}  // namespace oiekit
