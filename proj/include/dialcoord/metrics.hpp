#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dialcoord {

// Lowercase, punctuation split into separate tokens, whitespace split.
std::vector<std::string> tokenize(std::string_view text);

// Porter (1980) suffix-stripping stemmer, for lowercase ASCII words.
std::string porter_stem(std::string_view word);

// Corpus-level BLEU with uniform weights over orders 1..n, brevity penalty, no smoothing.
double bleu_n(const std::vector<std::string>& candidates, const std::vector<std::string>& references, int n);

// Mean per-example LCS F-measure (beta = 1.2).
double rouge_l(const std::vector<std::string>& candidates, const std::vector<std::string>& references);
inline constexpr double kRougeBeta = 1.2;

// Exact + stem unigram alignment; F_mean = 10PR/(R+9P), penalty 0.5 (chunks/matches)^3.
double meteor_simplified(const std::vector<std::string>& candidates, const std::vector<std::string>& references);
double meteor_sentence(std::string_view candidate, std::string_view reference);

// |unique n-grams| / |n-grams|, n-grams taken within each text.
double distinct_n(const std::vector<std::string>& texts, int n);

// |top-n relevant| / n given relevance flags in ranked order.
double precision_at_n(const std::vector<bool>& ranked_relevance, int n);
// Relevance = the ranked item's aspect is in the gold aspect set.
double precision_at_n(const std::vector<int>& ranked_aspects, const std::set<int>& relevant_aspects, int n);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

// 1 - levenshtein(a, b) / max(|a|, |b|), over bytes; 1 for two empty strings.
double normalized_edit_similarity(std::string_view a, std::string_view b);

struct MetricReport {
    double bleu1 = 0.0;
    double bleu2 = 0.0;
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    double meteor = 0.0;
    double distinct1 = 0.0;
    double distinct2 = 0.0;
    double distinct3 = 0.0;
    std::size_t n_examples = 0;
};

MetricReport evaluate_static(const std::vector<std::string>& predictions, const std::vector<std::string>& references);

}  // namespace dialcoord
