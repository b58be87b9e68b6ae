#pragma once

#include <string>
#include <vector>

#include "dialcoord/core.hpp"
#include "dialcoord/gateway.hpp"
#include "dialcoord/task_profile.hpp"

namespace dialcoord {

struct GenerationInput {
    DialogueHistory history;
    std::vector<TopicCandidate> top_candidates;  // ranked 1..K
    std::vector<StateSummary> summaries;         // recorded in traces, not sent to the prompt
};

// "1. first\n2. second" in rank order.
std::string render_candidates(const std::vector<TopicCandidate>& ranked);

std::string generation_prompt(const TaskProfile& profile, const GenerationInput& input);

// Removes a leading "Label:" (case-insensitive) from a completion.
std::string strip_speaker_label(std::string_view completion, std::string_view label);

// Throws "empty_generation" when nothing is left after stripping.
Utterance generate_utterance(const TaskProfile& profile, const GenerationInput& input, Gateway& gateway,
                             double temperature = 0.7);

// Aspect of the rank-1 candidate.
int prioritized_aspect(const std::vector<TopicCandidate>& ranked);

}  // namespace dialcoord
