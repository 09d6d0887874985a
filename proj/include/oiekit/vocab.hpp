#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "oiekit/core.hpp"
#include "oiekit/train_builder.hpp"

namespace oiekit {

namespace symbols {
inline const Token kPad = "<pad>";
inline const Token kUnk = "<unk>";
inline const Token kBos = "<bos>";
inline const Token kEos = "<eos>";
}  // namespace symbols

// Token <-> index bijection. Reserved symbols occupy fixed leading indices;
// corpus tokens follow, admitted at min_frequency and ordered by (count
// descending, spelling) so the mapping is deterministic.
class Vocab {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr int kBosId = 2;
  static constexpr int kEosId = 3;
  static constexpr int kClsId = 4;
  static constexpr int kSepId = 5;
  static constexpr int kRelId = 6;
  static constexpr int kObjId = 7;
  static constexpr int kEndId = 8;

  Vocab() { for (const Token& t : reserved()) push(t); }

  static const std::vector<Token>& reserved() {
    static const std::vector<Token> r{symbols::kPad, symbols::kUnk,  symbols::kBos,
                                      symbols::kEos, symbols::kCls,  symbols::kSep,
                                      symbols::kRel, symbols::kObj,  symbols::kEndOfExtractions};
    return r;
  }

  static Vocab build(const std::vector<TrainingInstance>& instances, int min_frequency = 2) {
    std::unordered_map<Token, int> counts;
    for (const auto& inst : instances) {
      for (const auto& t : inst.input) ++counts[t];
      for (const auto& t : inst.target) ++counts[t];
    }
    std::vector<std::pair<Token, int>> admitted;
    for (const auto& [tok, cnt] : counts) {
      if (cnt >= min_frequency && !is_known_reserved(tok)) admitted.emplace_back(tok, cnt);
    }
    std::sort(admitted.begin(), admitted.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocab v;
    for (const auto& [tok, cnt] : admitted) v.push(tok);
    return v;
  }

  // Rebuilds a vocab from its id-ordered token list (checkpoint loading).
  static Vocab from_tokens(const std::vector<Token>& tokens) {
    Vocab v;
    if (tokens.size() < reserved().size()) throw std::invalid_argument("vocab list too short");
    for (std::size_t i = 0; i < reserved().size(); ++i) {
      if (tokens[i] != reserved()[i]) throw std::invalid_argument("vocab reserved prefix mismatch");
    }
    for (std::size_t i = reserved().size(); i < tokens.size(); ++i) v.push(tokens[i]);
    return v;
  }

  int id(const Token& t) const {
    const auto it = index_.find(t);
    return it == index_.end() ? kUnkId : it->second;
  }

  bool contains(const Token& t) const { return index_.count(t) > 0; }

  const Token& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  int size() const { return static_cast<int>(tokens_.size()); }

  const std::vector<Token>& tokens() const { return tokens_; }

 private:
  static bool is_known_reserved(const Token& t) {
    const auto& r = reserved();
    return std::find(r.begin(), r.end(), t) != r.end();
  }

  void push(const Token& t) {
    index_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.push_back(t);
  }

  std::vector<Token> tokens_;
  std::unordered_map<Token, int> index_;
};

}  // namespace oiekit
