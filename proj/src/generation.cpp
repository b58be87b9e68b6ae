#include "dialcoord/generation.hpp"

#include <algorithm>
#include <cctype>

#include "dialcoord/error.hpp"

namespace dialcoord {

std::string render_candidates(const std::vector<TopicCandidate>& ranked) {
    std::vector<const TopicCandidate*> ordered;
    for (const auto& c : ranked) ordered.push_back(&c);
    std::stable_sort(ordered.begin(), ordered.end(), [](const TopicCandidate* a, const TopicCandidate* b) {
        return a->rank.value_or(1 << 30) < b->rank.value_or(1 << 30);
    });
    std::string out;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        if (i > 0) out += '\n';
        out += std::to_string(i + 1) + ". " + collapse_newlines(ordered[i]->text);
    }
    return out;
}

std::string generation_prompt(const TaskProfile& profile, const GenerationInput& input) {
    if (input.top_candidates.empty()) throw Error("no_candidates", "generation needs at least one candidate");
    return profile.generate_template.instantiate(
        {{"history", render_history(input.history, profile.labels)}, {"candidates", render_candidates(input.top_candidates)}});
}

std::string strip_speaker_label(std::string_view completion, std::string_view label) {
    std::string text = trim(completion);
    if (text.size() > label.size() && text[label.size()] == ':') {
        const bool same = std::equal(label.begin(), label.end(), text.begin(), [](char a, char b) {
            return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
        });
        if (same) text = trim(std::string_view(text).substr(label.size() + 1));
    }
    return text;
}

Utterance generate_utterance(const TaskProfile& profile, const GenerationInput& input, Gateway& gateway,
                             double temperature) {
    ChatRequest req;
    req.prompt = generation_prompt(profile, input);
    req.temperature = temperature;
    req.kind = profile.generate_template.template_id;
    std::string text = strip_speaker_label(gateway.chat_complete(req), profile.labels.system);
    if (text.empty()) throw Error("empty_generation", "completion was empty after removing the speaker label");
    const int next_index = input.history.empty() ? 0 : input.history.utterances().back().turn_index + 1;
    return Utterance{Speaker::system_role, std::move(text), next_index};
}

int prioritized_aspect(const std::vector<TopicCandidate>& ranked) {
    if (ranked.empty()) throw Error("no_candidates", "no ranked candidates");
    const TopicCandidate* best = &ranked.front();
    for (const auto& c : ranked) {
        if (c.rank && (!best->rank || *c.rank < *best->rank)) best = &c;
    }
    return best->aspect_id;
}

}  // namespace dialcoord
