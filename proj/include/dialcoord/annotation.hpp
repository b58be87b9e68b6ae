#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialcoord/agents.hpp"
#include "dialcoord/corpus.hpp"
#include "dialcoord/progression.hpp"
#include "dialcoord/pseudo_label.hpp"
#include "dialcoord/task_profile.hpp"
#include "dialcoord/trainer.hpp"

namespace dialcoord {

// Offline annotation of one system turn.
struct AnnotatedTurn {
    std::string dialogue_id;
    int round = 0;
    std::string history;  // rendered prefix history the agents saw
    std::vector<StateSummary> summaries;
    std::vector<TopicCandidate> candidates;
    std::vector<RankLabel> labels;  // parallel to candidates
    std::string gt_utterance;
    AspectSet gt_aspects;
    std::vector<std::string> gt_strategies;

    bool operator==(const AnnotatedTurn&) const;
};

nlohmann::json to_json(const AnnotatedTurn& turn);
AnnotatedTurn annotated_turn_from_json(const nlohmann::json& doc);

struct AnnotationFailure {
    std::string dialogue_id;
    int round = 0;
    std::string code;
    std::string message;
};

struct AnnotationReport {
    std::size_t written = 0;
    std::size_t already_present = 0;
    std::size_t skipped_no_history = 0;
    std::vector<AnnotationFailure> failures;

    nlohmann::json to_json() const;
};

// One record per system turn (in corpus order) appended to out_file as
// newline-delimited JSON. Turns already in the file are skipped, so an
// interrupted run can simply be restarted; a torn last line is discarded.
AnnotationReport annotate_corpus(const Corpus& corpus, const TaskProfile& profile, Gateway& gateway,
                                 const std::filesystem::path& out_file, const AgentOptions& options = {});

// In-memory variant used by tests.
std::vector<AnnotatedTurn> annotate_dialogue(const CorpusDialogue& dialogue, const TaskProfile& profile,
                                             Gateway& gateway, const AgentOptions& options = {},
                                             AnnotationReport* report = nullptr,
                                             const std::set<std::pair<std::string, int>>& skip = {});

std::vector<AnnotatedTurn> read_annotations(const std::filesystem::path& file);

// End-of-dialogue state embeddings for one aspect, rows ordered by dialogue
// id. Dialogues whose tracker call fails are skipped and logged; more than
// 10% skipped raises "too_many_failures".
TargetStateCorpus build_target_corpus(const Corpus& corpus, const AspectConfig& aspect, Gateway& gateway,
                                      const AgentOptions& options = {});

// Embeds summaries and candidate contexts of an annotated turn.
TrainingTurn to_training_turn(const AnnotatedTurn& turn, std::size_t aspect_count, Gateway& gateway);

}  // namespace dialcoord
