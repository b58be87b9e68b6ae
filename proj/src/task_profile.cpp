#include "dialcoord/task_profile.hpp"

#include <algorithm>

#include "dialcoord/error.hpp"

namespace dialcoord {

namespace fs = std::filesystem;

int default_candidate_count(Task task) { return task == Task::esc ? 4 : 3; }

SpeakerLabels default_speaker_labels(Task task) {
    if (task == Task::esc) return {"Supporter", "Seeker"};
    return {"Persuader", "Persuadee"};
}

std::vector<std::string> aspect_names(Task task) {
    if (task == Task::esc) return {"exploration", "comforting", "action"};
    return {"attention", "appeal", "proposition"};
}

const AspectConfig& TaskProfile::aspect(int aspect_id) const {
    for (const auto& a : aspects) {
        if (a.aspect_id == aspect_id) return a;
    }
    throw Error("unknown_aspect", "aspect id " + std::to_string(aspect_id));
}

const std::string& TaskProfile::aspect_name(int aspect_id) const { return aspect(aspect_id).name; }

const PromptTemplate& TaskProfile::extra(const std::string& name) const {
    auto it = extra_templates.find(name);
    if (it == extra_templates.end()) {
        throw Error("template_not_found", std::string(to_string(task)) + "/" + name);
    }
    return it->second;
}

void validate_aspects(const std::vector<AspectConfig>& aspects) {
    std::vector<int> ids;
    for (const auto& a : aspects) {
        if (a.candidate_count < 1) throw Error("invalid_aspects", "candidate_count must be >= 1 for " + a.name);
        ids.push_back(a.aspect_id);
    }
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] != static_cast<int>(i) + 1) {
            throw Error("invalid_aspects", "aspect ids must be distinct and contiguous from 1");
        }
    }
}

TaskProfile load_task_profile(Task task, const fs::path& templates_root, int m, int top_k) {
    TaskProfile profile;
    profile.task = task;
    profile.labels = default_speaker_labels(task);
    profile.top_k = top_k;
    profile.strategies = StrategyMap::builtin(task);
    const int count = m > 0 ? m : default_candidate_count(task);

    const std::string task_dir(to_string(task));
    const auto names = aspect_names(task);
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto dir = templates_root / task_dir / names[i];
        AspectConfig a;
        a.aspect_id = static_cast<int>(i) + 1;
        a.name = names[i];
        a.tracker_template = load_template(dir / "tracker.txt", task_dir + "/" + names[i] + "/tracker", task);
        a.promoter_template = load_template(dir / "promoter.txt", task_dir + "/" + names[i] + "/promoter", task);
        a.candidate_count = count;
        a.speaker_labels = profile.labels;
        profile.aspects.push_back(std::move(a));
    }
    validate_aspects(profile.aspects);

    profile.generate_template = load_template(templates_root / task_dir / "generate.txt", task_dir + "/generate", task);
    for (const char* extra : {"seeker", "baseline_gpt35", "baseline_cot", "baseline_mixinit"}) {
        const auto file = templates_root / task_dir / (std::string(extra) + ".txt");
        if (fs::exists(file)) {
            profile.extra_templates.emplace(extra, load_template(file, task_dir + "/" + extra, task));
        }
    }
    return profile;
}

}  // namespace dialcoord
