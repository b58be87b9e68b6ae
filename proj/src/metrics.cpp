#include "dialcoord/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "dialcoord/error.hpp"

namespace dialcoord {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            flush();
        } else if (std::ispunct(c)) {
            flush();
            tokens.emplace_back(1, static_cast<char>(c));
        } else {
            current += static_cast<char>(std::tolower(c));
        }
    }
    flush();
    return tokens;
}

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
    std::map<Ngram, int> counts;
    const auto len = static_cast<int>(tokens.size());
    for (int i = 0; i + n <= len; ++i) {
        ++counts[Ngram(tokens.begin() + i, tokens.begin() + i + n)];
    }
    return counts;
}

void require_paired(const std::vector<std::string>& c, const std::vector<std::string>& r) {
    if (c.empty()) throw Error("empty_corpus", "no examples to score");
    if (c.size() != r.size()) throw Error("dimension_mismatch", "candidates and references differ in count");
}

}  // namespace

double bleu_n(const std::vector<std::string>& candidates, const std::vector<std::string>& references, int n) {
    require_paired(candidates, references);
    if (n < 1) throw Error("invalid_argument", "BLEU order must be >= 1");
    std::vector<double> matched(static_cast<std::size_t>(n), 0.0);
    std::vector<double> total(static_cast<std::size_t>(n), 0.0);
    double cand_len = 0.0;
    double ref_len = 0.0;
    for (std::size_t e = 0; e < candidates.size(); ++e) {
        const auto c = tokenize(candidates[e]);
        const auto r = tokenize(references[e]);
        cand_len += static_cast<double>(c.size());
        ref_len += static_cast<double>(r.size());
        for (int order = 1; order <= n; ++order) {
            const auto cc = ngram_counts(c, order);
            const auto rc = ngram_counts(r, order);
            for (const auto& [gram, count] : cc) {
                auto it = rc.find(gram);
                const int clip = it == rc.end() ? 0 : std::min(count, it->second);
                matched[static_cast<std::size_t>(order - 1)] += clip;
                total[static_cast<std::size_t>(order - 1)] += count;
            }
        }
    }
    double log_sum = 0.0;
    for (int order = 0; order < n; ++order) {
        const auto o = static_cast<std::size_t>(order);
        if (total[o] == 0.0 || matched[o] == 0.0) return 0.0;
        log_sum += std::log(matched[o] / total[o]);
    }
    const double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
    return bp * std::exp(log_sum / n);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
    require_paired(candidates, references);
    double sum = 0.0;
    for (std::size_t e = 0; e < candidates.size(); ++e) {
        const auto c = tokenize(candidates[e]);
        const auto r = tokenize(references[e]);
        const auto lcs = static_cast<double>(lcs_length(c, r));
        if (lcs == 0.0) continue;
        const double p = lcs / static_cast<double>(c.size());
        const double rec = lcs / static_cast<double>(r.size());
        const double b2 = kRougeBeta * kRougeBeta;
        sum += (1.0 + b2) * p * rec / (rec + b2 * p);
    }
    return sum / static_cast<double>(candidates.size());
}

double meteor_sentence(std::string_view candidate, std::string_view reference) {
    const auto c = tokenize(candidate);
    const auto r = tokenize(reference);
    if (c.empty() || r.empty()) return 0.0;

    // alignment[i] = reference position matched to candidate token i, or -1
    std::vector<int> alignment(c.size(), -1);
    std::vector<bool> used(r.size(), false);
    auto align_stage = [&](auto&& key) {
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (alignment[i] >= 0) continue;
            const auto ki = key(c[i]);
            for (std::size_t j = 0; j < r.size(); ++j) {
                if (!used[j] && key(r[j]) == ki) {
                    alignment[i] = static_cast<int>(j);
                    used[j] = true;
                    break;
                }
            }
        }
    };
    align_stage([](const std::string& w) { return w; });
    align_stage([](const std::string& w) { return porter_stem(w); });

    int matches = 0;
    int chunks = 0;
    int prev = -2;
    bool prev_matched = false;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (alignment[i] < 0) {
            prev_matched = false;
            continue;
        }
        ++matches;
        if (!prev_matched || alignment[i] != prev + 1) ++chunks;
        prev = alignment[i];
        prev_matched = true;
    }
    if (matches == 0) return 0.0;
    const double p = matches / static_cast<double>(c.size());
    const double rec = matches / static_cast<double>(r.size());
    const double f_mean = 10.0 * p * rec / (rec + 9.0 * p);
    const double frag = static_cast<double>(chunks) / matches;
    const double penalty = 0.5 * frag * frag * frag;
    return f_mean * (1.0 - penalty);
}

double meteor_simplified(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
    require_paired(candidates, references);
    double sum = 0.0;
    for (std::size_t e = 0; e < candidates.size(); ++e) sum += meteor_sentence(candidates[e], references[e]);
    return sum / static_cast<double>(candidates.size());
}

double distinct_n(const std::vector<std::string>& texts, int n) {
    if (n < 1) throw Error("invalid_argument", "n must be >= 1");
    std::map<Ngram, int> all;
    long total = 0;
    for (const auto& t : texts) {
        for (const auto& [gram, count] : ngram_counts(tokenize(t), n)) {
            all[gram] += count;
            total += count;
        }
    }
    if (total == 0) throw Error("too_short", "no text has " + std::to_string(n) + " tokens");
    return static_cast<double>(all.size()) / static_cast<double>(total);
}

double precision_at_n(const std::vector<bool>& ranked_relevance, int n) {
    if (n < 1) throw Error("invalid_argument", "n must be >= 1");
    const auto top = std::min<std::size_t>(static_cast<std::size_t>(n), ranked_relevance.size());
    const auto hits = std::count(ranked_relevance.begin(), ranked_relevance.begin() + static_cast<std::ptrdiff_t>(top), true);
    return static_cast<double>(hits) / n;
}

double precision_at_n(const std::vector<int>& ranked_aspects, const std::set<int>& relevant_aspects, int n) {
    std::vector<bool> rel;
    rel.reserve(ranked_aspects.size());
    for (int a : ranked_aspects) rel.push_back(relevant_aspects.contains(a));
    return precision_at_n(rel, n);
}

double normalized_edit_similarity(std::string_view a, std::string_view b) {
    if (a.empty() && b.empty()) return 1.0;
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return 1.0 - static_cast<double>(prev[b.size()]) / static_cast<double>(std::max(a.size(), b.size()));
}

MetricReport evaluate_static(const std::vector<std::string>& predictions, const std::vector<std::string>& references) {
    MetricReport r;
    r.n_examples = predictions.size();
    r.bleu1 = bleu_n(predictions, references, 1);
    r.bleu2 = bleu_n(predictions, references, 2);
    r.bleu4 = bleu_n(predictions, references, 4);
    r.rouge_l = rouge_l(predictions, references);
    r.meteor = meteor_simplified(predictions, references);
    auto safe_distinct = [&](int n) {
        try {
            return distinct_n(predictions, n);
        } catch (const Error&) {
            return 0.0;
        }
    };
    r.distinct1 = safe_distinct(1);
    r.distinct2 = safe_distinct(2);
    r.distinct3 = safe_distinct(3);
    return r;
}

}  // namespace dialcoord
