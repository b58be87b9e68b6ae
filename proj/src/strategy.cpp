#include "dialcoord/strategy.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>

namespace dialcoord {

namespace {

std::string normalize(std::string_view s) {
    std::string out = trim(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace

void StrategyMap::add(std::string_view strategy, int aspect_id) { entries_[normalize(strategy)].insert(aspect_id); }

AspectSet StrategyMap::lookup(std::string_view strategy) const {
    auto it = entries_.find(normalize(strategy));
    if (it == entries_.end()) {
        spdlog::warn("unknown strategy '{}' for task {}", strategy, to_string(task_));
        return {};
    }
    return it->second;
}

AspectSet StrategyMap::lookup_all(const std::vector<std::string>& strategies) const {
    AspectSet out;
    for (const auto& s : strategies) {
        auto part = lookup(s);
        out.insert(part.begin(), part.end());
    }
    return out;
}

StrategyMap StrategyMap::builtin(Task task) {
    StrategyMap map(task);
    if (task == Task::esc) {
        map.add("Question", 1);
        for (auto s : {"Reflection of feelings", "Affirmation and Reassurance", "Restatement or Paraphrasing",
                       "Self-disclosure"}) {
            map.add(s, 2);
        }
        map.add("Providing Suggestions or Information", 3);
        // ESConv ships the suggestion label in two spellings.
        map.add("Providing Suggestions", 3);
    } else {
        for (auto s : {"greeting", "personal-related-inquiry", "neutral-to-inquiry", "source-related-inquiry",
                       "task-related-inquiry", "praise-user", "off-task"}) {
            map.add(s, 1);
        }
        for (auto s : {"credibility-appeal", "self-modeling", "logical-appeal", "foot-in-the-door",
                       "donation-information", "emotion-appeal", "personal-story"}) {
            map.add(s, 2);
        }
        for (auto s : {"proposition-of-donation", "ask-donation-amount", "ask-not-donate-reason", "ask-donate-more",
                       "confirm-donation"}) {
            map.add(s, 3);
        }
    }
    return map;
}

AspectSet strategy_to_aspects(std::string_view strategy, const StrategyMap& map) { return map.lookup(strategy); }

}  // namespace dialcoord
