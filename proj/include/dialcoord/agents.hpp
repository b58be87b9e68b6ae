#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dialcoord/core.hpp"
#include "dialcoord/gateway.hpp"
#include "dialcoord/task_profile.hpp"

namespace dialcoord {

struct AgentOutput {
    int aspect_id = 0;
    StateSummary summary;
    std::vector<TopicCandidate> candidates;
    std::string raw_promoter_text;
};

struct AgentOptions {
    double tracker_temperature = 0.0;
    double promoter_temperature = 0.7;
    int max_tokens = 256;
    // 0 disables history truncation.
    std::size_t max_history_chars = 0;
    bool embed_summaries = true;
    bool parallel = true;
};

// Tracker prompt for the aspect; exposed for inspection and tests.
std::string tracker_prompt(const AspectConfig& aspect, const DialogueHistory& history, const AgentOptions& options = {});
std::string promoter_prompt(const AspectConfig& aspect, const DialogueHistory& history, const StateSummary& summary,
                            const AgentOptions& options = {});

StateSummary track_state(const AspectConfig& aspect, const DialogueHistory& history, Gateway& gateway,
                         const AgentOptions& options = {});

// Parses the promoter's numbered list; keeps at most m items in listed order.
// Throws "unparseable_candidates" when nothing parses.
std::vector<TopicCandidate> promote_aspect(const AspectConfig& aspect, const DialogueHistory& history,
                                           const StateSummary& summary, Gateway& gateway,
                                           const AgentOptions& options = {}, std::string* raw_text = nullptr);

// Lines starting with "<int>." or "<int>)" (optionally after "-", "*" or a
// bullet), with strategy tags removed and whitespace trimmed.
std::vector<std::string> parse_numbered_list(std::string_view text);

// One output per aspect; tracker before promoter within an agent, agents
// independent of each other (run concurrently when options.parallel).
std::vector<AgentOutput> run_all_agents(const std::vector<AspectConfig>& aspects, const DialogueHistory& history,
                                        Gateway& gateway, const AgentOptions& options = {});

}  // namespace dialcoord
