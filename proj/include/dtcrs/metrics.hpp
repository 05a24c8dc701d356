#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dtcrs {

/// Porter's original suffix-stripping algorithm. Expects a lowercase word;
/// words of up to two letters are returned unchanged.
std::string porter_stem(std::string_view word);

/// Reading-comprehension answer normalization: lowercase, drop ASCII
/// punctuation, drop the articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view text);

/// Lowercased tokens with ASCII punctuation treated as whitespace. Used by
/// BLEU and METEOR.
std::vector<std::string> metric_tokens(std::string_view text);

/// Best over references of the harmonic mean of token precision and recall
/// on normalized answers. Both sides empty scores 1; one side empty scores 0.
double token_f1(std::string_view prediction, const std::vector<std::string>& references);

struct RougeParams {
  std::size_t length_limit_words = 100;
  double alpha = 0.5;
  double weight_factor = 1.2;
  bool stemming = true;
  bool apply_best = true;
};

/// Weighted-LCS ROUGE: a run of k consecutive matches earns k^w, precision
/// and recall are mapped back through the inverse weight function, and F
/// uses P*R / ((1 - alpha) P + alpha R). Text is lowercased, reduced to
/// alphanumeric tokens, cut to the word limit and stemmed (tokens longer
/// than three characters). With apply_best the best reference wins,
/// otherwise scores are averaged.
double rouge_l(std::string_view prediction, const std::vector<std::string>& references,
               const RougeParams& params = {});

/// Sentence BLEU with uniform weights over 1..max_n grams, clipped counts and
/// brevity penalty exp(1 - r/c) for c < r. Any zero n-gram match count gives
/// 0 (no smoothing). Best over references.
double bleu(std::string_view prediction, const std::vector<std::string>& references, int max_n);

struct MeteorParams {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
};

/// Unigram METEOR with exact then stem matching, fragmentation penalty
/// gamma * (chunks / matches)^beta and Fmean = PR / (alpha P + (1 - alpha) R).
/// Best over references. Identical inputs of n tokens score
/// 1 - gamma / n^beta.
double meteor(std::string_view prediction, const std::vector<std::string>& references,
              const MeteorParams& params = {});

struct ChoiceScores {
  double accuracy = 0.0;
  /// (correct - wrong / (options - 1)) / total, unclamped.
  double sat_style = 0.0;
};

/// `predictions[i]` empty means no answer was given: neither correct nor
/// wrong. Throws ArgumentError on length mismatch or fewer than 2 options.
ChoiceScores choice_scores(const std::vector<std::optional<std::size_t>>& predictions,
                           const std::vector<std::size_t>& golds, std::size_t options_count);

}  // namespace dtcrs
