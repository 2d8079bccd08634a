#pragma once

#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace seqdec {

struct ErrorBreakdown {
  long substitutions = 0;
  long deletions = 0;
  long insertions = 0;
  long reference_length = 0;

  long total_errors() const { return substitutions + deletions + insertions; }

  // (S+D+I)/reference_length; may exceed 1 for insertion-heavy hypotheses
  double rate() const {
    if (reference_length == 0)
      return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(total_errors()) / static_cast<double>(reference_length);
  }
};

// Minimal-edit alignment with unit costs.  Among minimal alignments the
// one with fewer insertions, then fewer deletions, is chosen so that
// error compositions are reproducible.
template <typename Tok>
ErrorBreakdown align(const std::vector<Tok>& reference, const std::vector<Tok>& hypothesis) {
  const std::size_t n = reference.size();
  const std::size_t m = hypothesis.size();
  using Cell = std::tuple<long, long, long>;  // (cost, insertions, deletions)
  std::vector<std::vector<Cell>> dp(n + 1, std::vector<Cell>(m + 1));
  for (std::size_t j = 1; j <= m; ++j) dp[0][j] = {static_cast<long>(j), static_cast<long>(j), 0};
  for (std::size_t i = 1; i <= n; ++i) dp[i][0] = {static_cast<long>(i), 0, static_cast<long>(i)};
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const long sub = reference[i - 1] == hypothesis[j - 1] ? 0 : 1;
      Cell diag{std::get<0>(dp[i - 1][j - 1]) + sub, std::get<1>(dp[i - 1][j - 1]),
                std::get<2>(dp[i - 1][j - 1])};
      Cell del{std::get<0>(dp[i - 1][j]) + 1, std::get<1>(dp[i - 1][j]),
               std::get<2>(dp[i - 1][j]) + 1};
      Cell ins{std::get<0>(dp[i][j - 1]) + 1, std::get<1>(dp[i][j - 1]) + 1,
               std::get<2>(dp[i][j - 1])};
      dp[i][j] = std::min(diag, std::min(del, ins));
    }
  }
  const auto& [cost, ins, del] = dp[n][m];
  ErrorBreakdown b;
  b.insertions = ins;
  b.deletions = del;
  b.substitutions = cost - ins - del;
  b.reference_length = static_cast<long>(n);
  return b;
}

inline std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream iss(text);
  std::string w;
  while (iss >> w) words.push_back(w);
  return words;
}

inline std::vector<char> split_chars(const std::string& text) {
  return std::vector<char>(text.begin(), text.end());
}

// Word mode: space-split tokens through the same alignment.
inline ErrorBreakdown word_errors(const std::string& reference, const std::string& hypothesis) {
  return align(split_words(reference), split_words(hypothesis));
}

inline ErrorBreakdown char_errors(const std::string& reference, const std::string& hypothesis) {
  return align(split_chars(reference), split_chars(hypothesis));
}

struct CorpusReport {
  ErrorBreakdown aggregate;
  std::vector<ErrorBreakdown> per_utterance;
};

// Aggregate counts are sums; the aggregate rate is weighted by reference
// lengths through the summed denominator.
template <typename Tok>
CorpusReport corpus_report(
    const std::vector<std::pair<std::vector<Tok>, std::vector<Tok>>>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("corpus_report: empty pair list");
  CorpusReport report;
  for (const auto& [ref, hyp] : pairs) {
    ErrorBreakdown b = align(ref, hyp);
    report.aggregate.substitutions += b.substitutions;
    report.aggregate.deletions += b.deletions;
    report.aggregate.insertions += b.insertions;
    report.aggregate.reference_length += b.reference_length;
    report.per_utterance.push_back(b);
  }
  return report;
}

}  // namespace seqdec
