#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace seqdec {

// Ordered token set with a distinguished EOS token.  Immutable after
// construction; all distributions in the library are indexed by it.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> tokens, std::size_t eos_index)
      : tokens_(std::move(tokens)), eos_(eos_index) {
    if (tokens_.size() < 2)
      throw std::invalid_argument("vocabulary needs at least one emittable token plus EOS");
    if (eos_ >= tokens_.size())
      throw std::invalid_argument("eos_index out of range");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
        throw std::invalid_argument("duplicate token: " + tokens_[i]);
    }
  }

  std::size_t size() const { return tokens_.size(); }
  int eos_index() const { return static_cast<int>(eos_); }
  const std::string& token(int i) const { return tokens_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool has(const std::string& tok) const { return index_.count(tok) != 0; }

  int index_of(const std::string& tok) const {
    auto it = index_.find(tok);
    if (it == index_.end()) throw std::invalid_argument("unknown token: " + tok);
    return it->second;
  }

  // Greedy longest-match tokenization of a transcript string.  EOS never
  // appears in text transcripts.
  std::vector<int> tokenize(const std::string& text) const {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
      int best = -1;
      std::size_t best_len = 0;
      for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (i == eos_) continue;
        const std::string& t = tokens_[i];
        if (t.size() > best_len && text.compare(pos, t.size(), t) == 0) {
          best = static_cast<int>(i);
          best_len = t.size();
        }
      }
      if (best < 0)
        throw std::invalid_argument("untokenizable text at offset " + std::to_string(pos) +
                                    ": " + text.substr(pos, 8));
      out.push_back(best);
      pos += best_len;
    }
    return out;
  }

  // Concatenates tokens, skipping EOS.
  std::string detokenize(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
      if (id == eos_index()) continue;
      out += token(id);
    }
    return out;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"tokens", tokens_}, {"eos_index", eos_}};
  }

  static Vocabulary from_json(const nlohmann::json& j) {
    return Vocabulary(j.at("tokens").get<std::vector<std::string>>(),
                      j.at("eos_index").get<std::size_t>());
  }

  // The paper-style WSJ character set: lowercase letters, space, apostrophe,
  // a noise marker, and EOS.
  static Vocabulary wsj_chars() {
    std::vector<std::string> toks;
    for (char c = 'a'; c <= 'z'; ++c) toks.emplace_back(1, c);
    toks.emplace_back(" ");
    toks.emplace_back("'");
    toks.emplace_back("<noise>");
    toks.emplace_back("</s>");
    const std::size_t eos = toks.size() - 1;
    return Vocabulary(std::move(toks), eos);
  }

  // Small synthetic alphabet: first `size-1` letters/digits plus EOS.
  static Vocabulary synthetic(std::size_t size) {
    static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
    if (size < 2 || size > alphabet.size() + 1)
      throw std::invalid_argument("synthetic vocab size out of range");
    std::vector<std::string> toks;
    for (std::size_t i = 0; i + 1 < size; ++i) toks.emplace_back(1, alphabet[i]);
    toks.emplace_back("</s>");
    return Vocabulary(std::move(toks), size - 1);
  }

 private:
  std::vector<std::string> tokens_;
  std::size_t eos_;
  std::map<std::string, int> index_;
};

}  // namespace seqdec
