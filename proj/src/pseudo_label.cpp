#include "dialcoord/pseudo_label.hpp"

#include <algorithm>
#include <numeric>

#include "dialcoord/error.hpp"

namespace dialcoord {

bool pseudo_label_compare(int aspect1, double similarity1, int aspect2, double similarity2,
                          const AspectSet& gt_aspects) {
    const bool in1 = gt_aspects.contains(aspect1);
    const bool in2 = gt_aspects.contains(aspect2);
    if (in1 && !in2) return true;
    if (!in1 && in2) return false;
    return similarity1 > similarity2;
}

bool pseudo_label_compare(const TopicCandidate& c1, const TopicCandidate& c2, const std::string& gt_utterance,
                          const AspectSet& gt_aspects, Gateway& gateway) {
    const auto gold = gateway.embed_text(gt_utterance);
    const double s1 = similarity(gateway.embed_text(c1.text), gold);
    const double s2 = similarity(gateway.embed_text(c2.text), gold);
    return pseudo_label_compare(c1.aspect_id, s1, c2.aspect_id, s2, gt_aspects);
}

std::vector<RankLabel> build_rank_labels(const std::vector<TopicCandidate>& candidates,
                                         const std::vector<double>& similarities, const AspectSet& gt_aspects) {
    if (candidates.empty()) throw Error("no_candidates", "nothing to label");
    if (similarities.size() != candidates.size()) throw Error("dimension_mismatch", "one similarity per candidate");
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ca = candidates[a];
        const auto& cb = candidates[b];
        if (pseudo_label_compare(ca.aspect_id, similarities[a], cb.aspect_id, similarities[b], gt_aspects)) return true;
        if (pseudo_label_compare(cb.aspect_id, similarities[b], ca.aspect_id, similarities[a], gt_aspects)) return false;
        if (ca.aspect_id != cb.aspect_id) return ca.aspect_id < cb.aspect_id;
        return ca.candidate_index < cb.candidate_index;
    });
    std::vector<RankLabel> labels(candidates.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const auto& c = candidates[order[pos]];
        labels[order[pos]] = RankLabel{c.aspect_id, c.candidate_index, static_cast<int>(pos) + 1};
    }
    return labels;
}

std::vector<RankLabel> build_rank_labels(const std::vector<TopicCandidate>& candidates,
                                         const std::string& gt_utterance, const AspectSet& gt_aspects,
                                         Gateway& gateway) {
    if (candidates.empty()) throw Error("no_candidates", "nothing to label");
    const auto gold = gateway.embed_text(gt_utterance);
    std::vector<double> sims;
    sims.reserve(candidates.size());
    for (const auto& c : candidates) sims.push_back(similarity(gateway.embed_text(c.text), gold));
    return build_rank_labels(candidates, sims, gt_aspects);
}

}  // namespace dialcoord
