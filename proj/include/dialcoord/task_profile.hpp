#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dialcoord/core.hpp"
#include "dialcoord/strategy.hpp"
#include "dialcoord/templates.hpp"

namespace dialcoord {

struct AspectConfig {
    int aspect_id = 1;
    std::string name;
    PromptTemplate tracker_template;
    PromptTemplate promoter_template;
    int candidate_count = 4;  // m
    SpeakerLabels speaker_labels;
};

// Defaults for m: 4 topic candidates per agent for emotional support, 3 for persuasion.
int default_candidate_count(Task task);
inline constexpr int kDefaultTopK = 3;

SpeakerLabels default_speaker_labels(Task task);
std::vector<std::string> aspect_names(Task task);

// Everything the pipeline needs to run one task: aspects with their prompt
// programs, rendering labels, strategy table and auxiliary templates.
struct TaskProfile {
    Task task = Task::esc;
    SpeakerLabels labels;
    std::vector<AspectConfig> aspects;
    int top_k = kDefaultTopK;
    StrategyMap strategies;
    PromptTemplate generate_template;
    // "seeker", "baseline_gpt35", "baseline_cot", "baseline_mixinit" when present.
    std::map<std::string, PromptTemplate> extra_templates;

    std::size_t aspect_count() const noexcept { return aspects.size(); }
    const AspectConfig& aspect(int aspect_id) const;
    const std::string& aspect_name(int aspect_id) const;
    const PromptTemplate& extra(const std::string& name) const;
};

// Reads templates/<task>/<aspect>/{tracker,promoter}.txt, templates/<task>/generate.txt
// and any optional extras. m <= 0 selects the task default.
TaskProfile load_task_profile(Task task, const std::filesystem::path& templates_root, int m = 0,
                              int top_k = kDefaultTopK);

// Throws "invalid_aspects" unless ids are distinct and contiguous from 1.
void validate_aspects(const std::vector<AspectConfig>& aspects);

}  // namespace dialcoord
