#pragma once

#include <cctype>
#include <stdexcept>
#include <string>
#include <vector>

#include "oiekit/util.hpp"

namespace oiekit {

// A token is a non-empty, lowercased string with no internal whitespace.
// Tokens are produced by tokenize() or by parsing trusted token files.
using Token = std::string;

// Reserved vocabulary symbols with fixed spellings. They structure model
// inputs/outputs and must never occur inside extraction fields.
namespace symbols {
inline const Token kCls = "[CLS]";
inline const Token kSep = "[SEP]";
inline const Token kRel = "<rel>";
inline const Token kObj = "<obj>";
inline const Token kEndOfExtractions = "<end_of_extractions>";

inline bool is_reserved(const Token& t) {
  return t == kCls || t == kSep || t == kRel || t == kObj || t == kEndOfExtractions;
}
}  // namespace symbols

class MalformedExtraction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Sentence {
  std::string id;
  std::vector<Token> tokens;
};

// One (arg1, rel, arg2) tuple. arg2 may be empty; arg1 and rel may not.
// Equality is slotwise over the token lists; confidence and source are
// metadata and excluded (that is what pool dedup keys on).
struct Extraction {
  std::vector<Token> arg1;
  std::vector<Token> rel;
  std::vector<Token> arg2;
  double confidence = 1.0;
  std::string source = "model";

  friend bool operator==(const Extraction& a, const Extraction& b) {
    return a.arg1 == b.arg1 && a.rel == b.rel && a.arg2 == b.arg2;
  }
};

struct MemoryInput {
  Sentence sentence;
  std::vector<Extraction> prior_extractions;
};

inline bool is_punct_split_char(char c) {
  switch (c) {
    case '.':
    case ',':
    case ';':
    case '(':
    case ')':
    case '"':
    case ':':
    case '!':
    case '?':
      return true;
    default:
      return false;
  }
}

// Lowercases, splits on whitespace, and detaches punctuation. The characters
// . , ; ( ) " : ! ? always become single-character tokens. An apostrophe
// starts a new token and stays attached to what follows, so a clitic like
// "'s" survives as one token. Total function; all-whitespace input gives [].
inline std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (char raw : text) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (is_punct_split_char(c)) {
      flush();
      out.emplace_back(1, c);
    } else if (c == '\'') {
      flush();
      cur.push_back(c);
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

inline std::string join_tokens(const std::vector<Token>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

inline void check_field_tokens(const std::vector<Token>& field, const char* slot) {
  for (const Token& t : field) {
    if (symbols::is_reserved(t)) {
      throw MalformedExtraction(std::string("reserved symbol '") + t + "' inside " + slot);
    }
  }
}

// arg1 ++ <rel> ++ rel ++ <obj> ++ arg2. The <obj> marker is emitted even
// when arg2 is empty. Rejects field content that collides with reserved
// symbols and empty arg1/rel.
inline std::vector<Token> linearize(const Extraction& ext) {
  if (ext.arg1.empty() || ext.rel.empty()) {
    throw MalformedExtraction("linearize: arg1 and rel must be non-empty");
  }
  check_field_tokens(ext.arg1, "arg1");
  check_field_tokens(ext.rel, "rel");
  check_field_tokens(ext.arg2, "arg2");
  std::vector<Token> out;
  out.reserve(ext.arg1.size() + ext.rel.size() + ext.arg2.size() + 2);
  out.insert(out.end(), ext.arg1.begin(), ext.arg1.end());
  out.push_back(symbols::kRel);
  out.insert(out.end(), ext.rel.begin(), ext.rel.end());
  out.push_back(symbols::kObj);
  out.insert(out.end(), ext.arg2.begin(), ext.arg2.end());
  return out;
}

// Inverse of linearize on decoder output: splits on the first <rel> and the
// first <obj> after it. Later duplicate markers (and any stray reserved
// symbols) are dropped so that a decodable sequence always yields clean
// fields or a MalformedExtraction. Confidence defaults to 1.0, source to
// "model".
inline Extraction parse_linearized(const std::vector<Token>& tokens) {
  Extraction ext;
  int phase = 0;  // 0 = arg1, 1 = rel, 2 = arg2
  for (const Token& t : tokens) {
    if (t == symbols::kRel) {
      if (phase == 0) phase = 1;
      continue;  // duplicate marker dropped
    }
    if (t == symbols::kObj) {
      if (phase == 1) phase = 2;
      continue;  // marker before <rel> or duplicate: dropped
    }
    if (symbols::is_reserved(t)) continue;
    switch (phase) {
      case 0: ext.arg1.push_back(t); break;
      case 1: ext.rel.push_back(t); break;
      default: ext.arg2.push_back(t); break;
    }
  }
  if (phase < 2) {
    throw MalformedExtraction("parse_linearized: missing <rel> or <obj> marker");
  }
  if (ext.arg1.empty() || ext.rel.empty()) {
    throw MalformedExtraction("parse_linearized: empty arg1 or rel");
  }
  return ext;
}

// [CLS] ++ sentence ++ ([SEP] ++ linearized extraction)* — the encoder input
// carrying the sentence plus everything extracted so far.
inline std::vector<Token> build_memory_input(const MemoryInput& m) {
  std::vector<Token> out;
  out.push_back(symbols::kCls);
  out.insert(out.end(), m.sentence.tokens.begin(), m.sentence.tokens.end());
  for (const Extraction& ext : m.prior_extractions) {
    out.push_back(symbols::kSep);
    const std::vector<Token> lin = linearize(ext);
    out.insert(out.end(), lin.begin(), lin.end());
  }
  return out;
}

// Tokens of arg1 ++ rel ++ arg2 with no markers; the serialization used for
// redundancy comparison between tuples.
inline std::vector<Token> serialized_tokens(const Extraction& ext) {
  std::vector<Token> out;
  out.reserve(ext.arg1.size() + ext.rel.size() + ext.arg2.size());
  out.insert(out.end(), ext.arg1.begin(), ext.arg1.end());
  out.insert(out.end(), ext.rel.begin(), ext.rel.end());
  out.insert(out.end(), ext.arg2.begin(), ext.arg2.end());
  return out;
}

// Dedup key: slot tokens with unit separators (tokens never contain
// whitespace or control characters, so this is collision-free).
inline std::string extraction_key(const Extraction& ext) {
  std::string key;
  for (const Token& t : ext.arg1) { key += t; key.push_back('\x1f'); }
  key.push_back('\x1e');
  for (const Token& t : ext.rel) { key += t; key.push_back('\x1f'); }
  key.push_back('\x1e');
  for (const Token& t : ext.arg2) { key += t; key.push_back('\x1f'); }
  return key;
}

}  // namespace oiekit
