#pragma once

#include <string>
#include <vector>

#include "dialcoord/core.hpp"
#include "dialcoord/gateway.hpp"
#include "dialcoord/strategy.hpp"

namespace dialcoord {

struct RankLabel {
    int aspect_id = 0;
    int candidate_index = 0;
    int position = 0;  // 1 = best
};

// Pure comparison core: does candidate 1 rank strictly above candidate 2?
// Aspect match decides first; otherwise the more similar candidate wins.
bool pseudo_label_compare(int aspect1, double similarity1, int aspect2, double similarity2,
                          const AspectSet& gt_aspects);

// Embeds both candidates and the gold utterance to compare by inner product.
bool pseudo_label_compare(const TopicCandidate& c1, const TopicCandidate& c2, const std::string& gt_utterance,
                          const AspectSet& gt_aspects, Gateway& gateway);

// Positions 1..N ordered by (aspect match desc, similarity desc,
// aspect_id asc, candidate_index asc). Output is parallel to the input.
std::vector<RankLabel> build_rank_labels(const std::vector<TopicCandidate>& candidates,
                                         const std::vector<double>& similarities, const AspectSet& gt_aspects);

std::vector<RankLabel> build_rank_labels(const std::vector<TopicCandidate>& candidates,
                                         const std::string& gt_utterance, const AspectSet& gt_aspects,
                                         Gateway& gateway);

}  // namespace dialcoord
