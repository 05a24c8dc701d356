#include "dtcrs/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>

#include "dtcrs/error.hpp"

namespace dtcrs {

namespace {

// Porter stemmer over a working buffer; `k` is the index of the last
// character and `j` the end of the stem under test.
class Porter {
 public:
  explicit Porter(std::string_view word) : b_(word), k_(static_cast<int>(word.size()) - 1) {}

  std::string run() {
    if (k_ <= 1) return b_;
    step1ab();
    if (k_ > 0) {
      step1c();
      step2();
      step3();
      step4();
      step5();
    }
    return b_.substr(0, static_cast<std::size_t>(k_ + 1));
  }

 private:
  struct Rule {
    const char* suffix;
    const char* replacement;
  };

  bool cons(int i) const {
    switch (b_[static_cast<std::size_t>(i)]) {
      case 'a': case 'e': case 'i': case 'o': case 'u': return false;
      case 'y': return i == 0 ? true : !cons(i - 1);
      default: return true;
    }
  }

  // Number of VC sequences in b[0..j].
  int m() const {
    int n = 0;
    int i = 0;
    for (;;) {
      if (i > j_) return n;
      if (!cons(i)) break;
      ++i;
    }
    ++i;
    for (;;) {
      for (;;) {
        if (i > j_) return n;
        if (cons(i)) break;
        ++i;
      }
      ++i;
      ++n;
      for (;;) {
        if (i > j_) return n;
        if (!cons(i)) break;
        ++i;
      }
      ++i;
    }
  }

  bool vowel_in_stem() const {
    for (int i = 0; i <= j_; ++i)
      if (!cons(i)) return true;
    return false;
  }

  bool double_consonant(int i) const {
    if (i < 1) return false;
    if (b_[static_cast<std::size_t>(i)] != b_[static_cast<std::size_t>(i - 1)]) return false;
    return cons(i);
  }

  // consonant-vowel-consonant ending at i, the last not w, x or y.
  bool cvc(int i) const {
    if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
    const char ch = b_[static_cast<std::size_t>(i)];
    return ch != 'w' && ch != 'x' && ch != 'y';
  }

  bool ends(std::string_view s) {
    const int len = static_cast<int>(s.size());
    if (len > k_ + 1) return false;
    if (b_.compare(static_cast<std::size_t>(k_ - len + 1), s.size(), s) != 0) return false;
    j_ = k_ - len;
    return true;
  }

  void set_to(std::string_view s) {
    b_.replace(static_cast<std::size_t>(j_ + 1), static_cast<std::size_t>(k_ - j_), s);
    k_ = j_ + static_cast<int>(s.size());
    b_.resize(static_cast<std::size_t>(k_ + 1));
  }

  // First rule whose suffix matches decides; it applies only when the stem
  // measure exceeds `min_m`.
  void apply_rules(std::initializer_list<Rule> rules, int min_m) {
    for (const auto& r : rules) {
      if (ends(r.suffix)) {
        if (m() > min_m) set_to(r.replacement);
        return;
      }
    }
  }

  void step1ab() {
    if (b_[static_cast<std::size_t>(k_)] == 's') {
      if (ends("sses")) {
        k_ -= 2;
      } else if (ends("ies")) {
        set_to("i");
      } else if (b_[static_cast<std::size_t>(k_ - 1)] != 's') {
        --k_;
      }
      b_.resize(static_cast<std::size_t>(k_ + 1));
    }
    if (ends("eed")) {
      if (m() > 0) {
        --k_;
        b_.resize(static_cast<std::size_t>(k_ + 1));
      }
    } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
      k_ = j_;
      b_.resize(static_cast<std::size_t>(k_ + 1));
      if (ends("at")) {
        set_to("ate");
      } else if (ends("bl")) {
        set_to("ble");
      } else if (ends("iz")) {
        set_to("ize");
      } else if (double_consonant(k_)) {
        const char ch = b_[static_cast<std::size_t>(k_)];
        if (ch != 'l' && ch != 's' && ch != 'z') {
          --k_;
          b_.resize(static_cast<std::size_t>(k_ + 1));
        }
      } else {
        j_ = k_;
        if (m() == 1 && cvc(k_)) {
          b_ += 'e';
          ++k_;
        }
      }
    }
  }

  void step1c() {
    if (ends("y") && vowel_in_stem()) b_[static_cast<std::size_t>(k_)] = 'i';
  }

  void step2() {
    apply_rules({{"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
                 {"izer", "ize"}, {"abli", "able"}, {"alli", "al"}, {"entli", "ent"},
                 {"eli", "e"}, {"ousli", "ous"}, {"ization", "ize"}, {"ation", "ate"},
                 {"ator", "ate"}, {"alism", "al"}, {"iveness", "ive"}, {"fulness", "ful"},
                 {"ousness", "ous"}, {"aliti", "al"}, {"iviti", "ive"}, {"biliti", "ble"}},
                0);
  }

  void step3() {
    apply_rules({{"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
                 {"ical", "ic"}, {"ful", ""}, {"ness", ""}},
                0);
  }

  void step4() {
    static const char* const kSuffixes[] = {"al",   "ance", "ence", "er",  "ic",  "able", "ible",
                                            "ant",  "ement", "ment", "ent", "ion", "ou",   "ism",
                                            "ate",  "iti",  "ous",  "ive", "ize"};
    for (const char* s : kSuffixes) {
      if (!ends(s)) continue;
      if (std::string_view(s) == "ion") {
        const bool st = j_ >= 0 && (b_[static_cast<std::size_t>(j_)] == 's' || b_[static_cast<std::size_t>(j_)] == 't');
        if (!st) continue;
      }
      if (m() > 1) {
        k_ = j_;
        b_.resize(static_cast<std::size_t>(k_ + 1));
      }
      return;
    }
  }

  void step5() {
    j_ = k_;
    if (b_[static_cast<std::size_t>(k_)] == 'e') {
      const int a = m();
      if (a > 1 || (a == 1 && !cvc(k_ - 1))) {
        --k_;
        b_.resize(static_cast<std::size_t>(k_ + 1));
      }
    }
    if (b_[static_cast<std::size_t>(k_)] == 'l' && double_consonant(k_) && m() > 1) {
      --k_;
      b_.resize(static_cast<std::size_t>(k_ + 1));
    }
  }

  std::string b_;
  int k_;
  int j_ = 0;
};

bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c); }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double f1_tokens(const std::vector<std::string>& pred, const std::vector<std::string>& ref) {
  if (pred.empty() || ref.empty()) return pred.empty() && ref.empty() ? 1.0 : 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : ref) ++counts[t];
  int same = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++same;
    }
  }
  if (same == 0) return 0.0;
  const double p = static_cast<double>(same) / static_cast<double>(pred.size());
  const double r = static_cast<double>(same) / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

void require_refs(const std::vector<std::string>& references, const char* metric) {
  if (references.empty()) throw ArgumentError(std::string(metric) + ": at least one reference required");
}

std::vector<std::string> rouge_tokens(std::string_view text, const RougeParams& params) {
  std::vector<std::string> words = split_ws(text);
  if (params.length_limit_words > 0 && words.size() > params.length_limit_words) {
    words.resize(params.length_limit_words);
  }
  std::string joined;
  for (const auto& w : words) {
    joined += ' ';
    joined += w;
  }
  for (auto& c : joined) {
    const auto u = static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(c)));
    c = (std::isalnum(u) && u < 128) ? static_cast<char>(u) : ' ';
  }
  std::vector<std::string> tokens = split_ws(joined);
  if (params.stemming) {
    for (auto& t : tokens)
      if (t.size() > 3) t = porter_stem(t);
  }
  return tokens;
}

// Weighted LCS score with f(k) = k^w for a run of k consecutive matches.
double wlcs(const std::vector<std::string>& x, const std::vector<std::string>& y, double w) {
  const std::size_t m = x.size(), n = y.size();
  std::vector<std::vector<double>> c(m + 1, std::vector<double>(n + 1, 0.0));
  std::vector<std::vector<int>> run(m + 1, std::vector<int>(n + 1, 0));
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      if (x[i - 1] == y[j - 1]) {
        const int k = run[i - 1][j - 1];
        c[i][j] = c[i - 1][j - 1] + std::pow(k + 1, w) - std::pow(k, w);
        run[i][j] = k + 1;
      } else if (c[i - 1][j] >= c[i][j - 1]) {
        c[i][j] = c[i - 1][j];
      } else {
        c[i][j] = c[i][j - 1];
      }
    }
  }
  return c[m][n];
}

double rouge_single(const std::vector<std::string>& pred, const std::vector<std::string>& ref,
                    const RougeParams& params) {
  if (pred.empty() || ref.empty()) return pred.empty() && ref.empty() ? 1.0 : 0.0;
  const double w = params.weight_factor;
  const double score = wlcs(ref, pred, w);
  if (score <= 0.0) return 0.0;
  const double recall = std::pow(score / std::pow(static_cast<double>(ref.size()), w), 1.0 / w);
  const double precision = std::pow(score / std::pow(static_cast<double>(pred.size()), w), 1.0 / w);
  return precision * recall / ((1.0 - params.alpha) * precision + params.alpha * recall);
}

using Ngrams = std::map<std::vector<std::string>, int>;

Ngrams ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  Ngrams out;
  if (tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

double bleu_single(const std::vector<std::string>& hyp, const std::vector<std::string>& ref, int max_n) {
  if (hyp.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const Ngrams h = ngrams(hyp, static_cast<std::size_t>(n));
    const Ngrams r = ngrams(ref, static_cast<std::size_t>(n));
    int clipped = 0, total = 0;
    for (const auto& [g, count] : h) {
      total += count;
      const auto it = r.find(g);
      if (it != r.end()) clipped += std::min(count, it->second);
    }
    if (clipped == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(std::max(total, 1))) / max_n;
  }
  const double c = static_cast<double>(hyp.size());
  const double r = static_cast<double>(ref.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum);
}

// Matches hypothesis/reference tokens scanning both from the end, as in the
// common METEOR reference implementation; matched entries are removed.
void match_enums(std::vector<std::pair<std::size_t, std::string>>& hyp,
                 std::vector<std::pair<std::size_t, std::string>>& ref,
                 std::vector<std::pair<std::size_t, std::size_t>>& matches) {
  for (std::size_t ii = hyp.size(); ii-- > 0;) {
    for (std::size_t jj = ref.size(); jj-- > 0;) {
      if (hyp[ii].second == ref[jj].second) {
        matches.emplace_back(hyp[ii].first, ref[jj].first);
        hyp.erase(hyp.begin() + static_cast<std::ptrdiff_t>(ii));
        ref.erase(ref.begin() + static_cast<std::ptrdiff_t>(jj));
        break;
      }
    }
  }
}

double meteor_single(const std::vector<std::string>& hyp_tokens, const std::vector<std::string>& ref_tokens,
                     const MeteorParams& params) {
  if (hyp_tokens.empty() || ref_tokens.empty()) return 0.0;
  std::vector<std::pair<std::size_t, std::string>> hyp, ref;
  for (std::size_t i = 0; i < hyp_tokens.size(); ++i) hyp.emplace_back(i, hyp_tokens[i]);
  for (std::size_t i = 0; i < ref_tokens.size(); ++i) ref.emplace_back(i, ref_tokens[i]);
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  match_enums(hyp, ref, matches);
  for (auto& e : hyp) e.second = porter_stem(e.second);
  for (auto& e : ref) e.second = porter_stem(e.second);
  match_enums(hyp, ref, matches);
  if (matches.empty()) return 0.0;
  std::sort(matches.begin(), matches.end());

  std::size_t chunks = 1;
  for (std::size_t i = 0; i + 1 < matches.size(); ++i) {
    if (!(matches[i + 1].first == matches[i].first + 1 && matches[i + 1].second == matches[i].second + 1)) {
      ++chunks;
    }
  }
  const double mc = static_cast<double>(matches.size());
  const double precision = mc / static_cast<double>(hyp_tokens.size());
  const double recall = mc / static_cast<double>(ref_tokens.size());
  const double fmean = precision * recall / (params.alpha * precision + (1.0 - params.alpha) * recall);
  const double penalty = params.gamma * std::pow(static_cast<double>(chunks) / mc, params.beta);
  return (1.0 - penalty) * fmean;
}

}  // namespace

std::string porter_stem(std::string_view word) { return Porter(word).run(); }

std::string normalize_answer(std::string_view text) {
  std::string s;
  for (char c : lower(text))
    if (!is_ascii_punct(static_cast<unsigned char>(c))) s += c;
  std::string out;
  for (const auto& tok : split_ws(s)) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

std::vector<std::string> metric_tokens(std::string_view text) {
  std::string s = lower(text);
  for (auto& c : s)
    if (is_ascii_punct(static_cast<unsigned char>(c))) c = ' ';
  return split_ws(s);
}

double token_f1(std::string_view prediction, const std::vector<std::string>& references) {
  require_refs(references, "token_f1");
  const auto pred = split_ws(normalize_answer(prediction));
  double best = 0.0;
  for (const auto& ref : references) best = std::max(best, f1_tokens(pred, split_ws(normalize_answer(ref))));
  return best;
}

double rouge_l(std::string_view prediction, const std::vector<std::string>& references,
               const RougeParams& params) {
  require_refs(references, "rouge_l");
  if (params.weight_factor <= 0.0) throw ArgumentError("rouge_l: weight factor must be positive");
  const auto pred = rouge_tokens(prediction, params);
  double best = 0.0, sum = 0.0;
  for (const auto& ref : references) {
    const double s = rouge_single(pred, rouge_tokens(ref, params), params);
    best = std::max(best, s);
    sum += s;
  }
  return params.apply_best ? best : sum / static_cast<double>(references.size());
}

double bleu(std::string_view prediction, const std::vector<std::string>& references, int max_n) {
  require_refs(references, "bleu");
  if (max_n < 1) throw ArgumentError("bleu: max_n must be at least 1");
  const auto hyp = metric_tokens(prediction);
  double best = 0.0;
  for (const auto& ref : references) best = std::max(best, bleu_single(hyp, metric_tokens(ref), max_n));
  return best;
}

double meteor(std::string_view prediction, const std::vector<std::string>& references, const MeteorParams& params) {
  require_refs(references, "meteor");
  const auto hyp = metric_tokens(prediction);
  double best = 0.0;
  for (const auto& ref : references) best = std::max(best, meteor_single(hyp, metric_tokens(ref), params));
  return best;
}

ChoiceScores choice_scores(const std::vector<std::optional<std::size_t>>& predictions,
                           const std::vector<std::size_t>& golds, std::size_t options_count) {
  if (predictions.size() != golds.size()) throw ArgumentError("choice_scores: length mismatch");
  if (options_count < 2) throw ArgumentError("choice_scores: need at least two options");
  ChoiceScores out;
  if (golds.empty()) return out;
  double correct = 0.0, wrong = 0.0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (!predictions[i]) continue;
    if (*predictions[i] == golds[i]) {
      correct += 1.0;
    } else {
      wrong += 1.0;
    }
  }
  const double n = static_cast<double>(golds.size());
  out.accuracy = correct / n;
  out.sat_style = (correct - wrong / static_cast<double>(options_count - 1)) / n;
  return out;
}

}  // namespace dtcrs
