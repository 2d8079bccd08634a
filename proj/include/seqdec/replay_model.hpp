#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "seqdec/distribution.hpp"
#include "seqdec/rng.hpp"
#include "seqdec/vocabulary.hpp"

namespace seqdec {

// Deterministic stand-in for a trained speller: a table mapping every
// reachable prefix to the logits and attention row the network would
// have produced.  Immutable after construction.
class PrefixTableModel {
 public:
  static constexpr int kFormatVersion = 1;

  struct Entry {
    std::vector<double> logits;
    std::vector<double> attention;
  };

  PrefixTableModel(Vocabulary vocab, std::size_t frame_count,
                   std::map<std::vector<int>, Entry> table,
                   std::vector<int> reference, bool fallback)
      : vocab_(std::move(vocab)),
        frame_count_(frame_count),
        table_(std::move(table)),
        reference_(std::move(reference)),
        fallback_(fallback) {
    validate();
  }

  const Vocabulary& vocab() const { return vocab_; }
  std::size_t frame_count() const { return frame_count_; }
  const std::vector<int>& reference() const { return reference_; }
  bool fallback_enabled() const { return fallback_; }
  const std::map<std::vector<int>, Entry>& table() const { return table_; }

  // Table lookup; uniform logits and attention when the prefix is
  // unlisted and fallback is on.
  Entry step(std::span<const int> prefix) const {
    auto it = table_.find(std::vector<int>(prefix.begin(), prefix.end()));
    if (it != table_.end()) return it->second;
    if (!fallback_) {
      std::ostringstream oss;
      oss << "unknown prefix (fallback disabled): \"" << vocab_.detokenize(prefix) << "\"";
      throw std::out_of_range(oss.str());
    }
    Entry e;
    e.logits.assign(vocab_.size(), 0.0);
    e.attention.assign(frame_count_, 1.0 / static_cast<double>(frame_count_));
    return e;
  }

  void save(std::ostream& os) const {
    nlohmann::json header{{"version", kFormatVersion},
                          {"vocab", vocab_.tokens()},
                          {"eos_index", vocab_.eos_index()},
                          {"frame_count", frame_count_},
                          {"reference", vocab_.detokenize(reference_)},
                          {"fallback", fallback_}};
    os << header.dump() << "\n";
    for (const auto& [prefix, entry] : table_) {
      nlohmann::json rec{{"prefix", vocab_.detokenize(prefix)},
                         {"logits", entry.logits},
                         {"attention", entry.attention}};
      os << rec.dump() << "\n";
    }
  }

  void save_file(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write model file: " + path);
    save(os);
  }

  static PrefixTableModel load(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("model file: missing header");
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.at("version").get<int>() != kFormatVersion)
      throw std::invalid_argument("model file: unsupported version");
    Vocabulary vocab(header.at("vocab").get<std::vector<std::string>>(),
                     header.at("eos_index").get<std::size_t>());
    const std::size_t frames = header.at("frame_count").get<std::size_t>();
    std::vector<int> reference = vocab.tokenize(header.at("reference").get<std::string>());
    const bool fallback = header.value("fallback", false);

    std::map<std::vector<int>, Entry> table;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      nlohmann::json rec = nlohmann::json::parse(line);
      std::vector<int> prefix = vocab.tokenize(rec.at("prefix").get<std::string>());
      Entry e{rec.at("logits").get<std::vector<double>>(),
              rec.at("attention").get<std::vector<double>>()};
      if (!table.emplace(std::move(prefix), std::move(e)).second)
        throw std::invalid_argument("model file: duplicate prefix record \"" +
                                    rec.at("prefix").get<std::string>() + "\"");
    }
    return PrefixTableModel(std::move(vocab), frames, std::move(table), std::move(reference),
                            fallback);
  }

  static PrefixTableModel load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open model file: " + path);
    return load(is);
  }

 private:
  void validate() const {
    if (table_.find({}) == table_.end())
      throw std::invalid_argument("model: empty prefix must be present");
    for (const auto& [prefix, entry] : table_) {
      if (entry.logits.size() != vocab_.size())
        throw std::invalid_argument("model: logit vector length mismatch");
      check_finite(entry.logits, "model logits");
      if (entry.attention.size() != frame_count_)
        throw std::invalid_argument("model: ragged attention row");
      double sum = 0.0;
      for (double w : entry.attention) {
        if (w < 0.0 || !std::isfinite(w))
          throw std::invalid_argument("model: bad attention weight");
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument("model: attention row must sum to 1");
      for (int t : prefix)
        if (t < 0 || static_cast<std::size_t>(t) >= vocab_.size() || t == vocab_.eos_index())
          throw std::invalid_argument("model: invalid prefix token");
    }
    for (std::size_t n = 0; n < reference_.size(); ++n) {
      std::vector<int> prefix(reference_.begin(), reference_.begin() + static_cast<long>(n));
      if (table_.find(prefix) == table_.end())
        throw std::invalid_argument("model: reference prefix missing from table");
    }
  }

  Vocabulary vocab_;
  std::size_t frame_count_;
  std::map<std::vector<int>, Entry> table_;
  std::vector<int> reference_;
  bool fallback_;
};

struct SyntheticConfig {
  std::uint64_t seed = 0;
  int vocab_size = 8;        // including EOS
  int frame_count = 0;       // 0: one frame per reference token
  int transcript_length = 12;
  double sharpness = 20.0;   // kappa: scale of the correct-token logit margin
  int distractor_count = 3;  // tokens given non-trivial mass off the top choice
  bool truncation_trap = false;  // plant a high-probability early-EOS branch
  bool beam_trap = false;        // plant a locally-wrong / globally-worse branch

  void validate() const {
    if (transcript_length < 1) throw std::invalid_argument("transcript_length must be >= 1");
    if (vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
    if (!(sharpness > 0.0)) throw std::invalid_argument("sharpness must be > 0");
    if (distractor_count < 0 || distractor_count >= vocab_size - 1)
      throw std::invalid_argument("distractor_count out of range");
    if ((truncation_trap || beam_trap) && transcript_length < 6)
      throw std::invalid_argument("traps need transcript_length >= 6");
  }
};

namespace detail {

// Unimodal attention row peaked at `center`.
inline std::vector<double> peaked_attention(std::size_t frames, std::size_t center) {
  std::vector<double> row(frames, 0.0);
  if (frames == 1) {
    row[0] = 1.0;
    return row;
  }
  center = std::min(center, frames - 1);
  row[center] = 0.8;
  double spill = 0.2;
  if (center > 0 && center + 1 < frames) {
    row[center - 1] = 0.1;
    row[center + 1] = 0.1;
  } else if (center > 0) {
    row[center - 1] = spill;
  } else {
    row[center + 1] = spill;
  }
  return row;
}

}  // namespace detail

// Deterministic in the seed.  Along the reference path the correct token
// leads by a margin with scale `sharpness`, and attention advances
// monotonically so the full transcript covers every frame at tau = 0.5.
inline PrefixTableModel generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  SplitMix64 rng(SplitMix64::mix(cfg.seed, 0x5eedecdecULL));
  const int v = cfg.vocab_size;
  const int eos = v - 1;
  const int emittable = v - 1;
  const std::size_t len = static_cast<std::size_t>(cfg.transcript_length);
  const std::size_t frames = cfg.frame_count > 0 ? static_cast<std::size_t>(cfg.frame_count) : len;

  Vocabulary vocab = Vocabulary::synthetic(static_cast<std::size_t>(v));

  std::vector<int> reference(len);
  for (auto& t : reference) t = static_cast<int>(rng.below(static_cast<std::uint64_t>(emittable)));

  const std::size_t trunc_pos = cfg.truncation_trap ? len / 2 : len + 1;
  const std::size_t beam_pos = cfg.beam_trap ? len / 3 : len + 1;

  std::map<std::vector<int>, PrefixTableModel::Entry> table;

  // Entries along the reference path (incl. the full-reference prefix,
  // whose correct "token" is EOS).
  for (std::size_t i = 0; i <= len; ++i) {
    const int correct = i < len ? reference[i] : eos;
    double margin = cfg.sharpness * rng.uniform(0.75, 1.25);
    if (i == len && cfg.truncation_trap) margin = rng.uniform(1.4, 1.8);

    PrefixTableModel::Entry e;
    e.logits.assign(static_cast<std::size_t>(v), 0.0);
    for (auto& l : e.logits) l = rng.uniform(-0.25, 0.25) - margin;
    e.logits[static_cast<std::size_t>(correct)] += margin;
    // distractors sit halfway up, clearly below the top token
    for (int d = 0; d < cfg.distractor_count; ++d) {
      int tok = static_cast<int>(rng.below(static_cast<std::uint64_t>(emittable)));
      if (tok == correct) continue;
      e.logits[static_cast<std::size_t>(tok)] =
          e.logits[static_cast<std::size_t>(correct)] - (0.5 * margin + 1.0);
    }
    if (i == trunc_pos && i < len) {
      // EOS runs second, within half a nat of the correct token
      e.logits[static_cast<std::size_t>(eos)] =
          e.logits[static_cast<std::size_t>(correct)] - rng.uniform(0.25, 0.45);
    }
    e.attention = detail::peaked_attention(frames, i * frames / std::max<std::size_t>(len, 1));

    std::vector<int> prefix(reference.begin(), reference.begin() + static_cast<long>(std::min(i, len)));
    if (i == beam_pos && i < len) {
      // locally-wrong branch: a distractor outranks the correct token by
      // ~5 nats, but its continuation wanders through flat confusion
      int wrong = correct;
      while (wrong == correct)
        wrong = static_cast<int>(rng.below(static_cast<std::uint64_t>(emittable)));
      e.logits[static_cast<std::size_t>(wrong)] =
          e.logits[static_cast<std::size_t>(correct)] + 5.0;

      std::vector<int> chain = prefix;
      chain.push_back(wrong);
      const int chain_len = 6;
      for (int d = 0; d < chain_len; ++d) {
        PrefixTableModel::Entry c;
        c.logits.assign(static_cast<std::size_t>(v), -30.0);
        int lead = -1;
        for (int s = 0; s < std::max(cfg.distractor_count, 2); ++s) {
          int tok = static_cast<int>(rng.below(static_cast<std::uint64_t>(emittable)));
          c.logits[static_cast<std::size_t>(tok)] = rng.uniform(-0.05, 0.05);
          if (lead < 0) lead = tok;
        }
        if (d >= 4) {
          // termination becomes available (and greedily preferred)
          c.logits[static_cast<std::size_t>(eos)] = 0.3;
        } else {
          c.logits[static_cast<std::size_t>(lead)] += 0.1;
        }
        c.attention = detail::peaked_attention(
            frames, (i + static_cast<std::size_t>(d)) * frames / std::max<std::size_t>(len, 1));
        table.emplace(chain, std::move(c));
        if (d >= 4) break;
        chain.push_back(lead);
      }
    }
    table.emplace(std::move(prefix), std::move(e));
  }

  return PrefixTableModel(std::move(vocab), frames, std::move(table), std::move(reference),
                          /*fallback=*/true);
}

}  // namespace seqdec
