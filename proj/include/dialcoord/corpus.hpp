#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialcoord/core.hpp"
#include "dialcoord/strategy.hpp"

namespace dialcoord {

struct CorpusTurn {
    Speaker speaker = Speaker::user_role;
    std::string text;
    std::vector<std::string> strategies;  // system turns only
};

struct CorpusDialogue {
    std::string dialogue_id;
    std::optional<std::string> problem_summary;
    std::optional<std::string> emotion_type;
    std::optional<std::string> problem_type;
    std::vector<CorpusTurn> turns;

    DialogueHistory history(Task task, std::size_t turn_count) const;
    DialogueHistory history(Task task) const { return history(task, turns.size()); }
};

struct Corpus {
    Task task = Task::esc;
    std::vector<CorpusDialogue> dialogues;
    // "train" / "validation" / "test" -> dialogue ids
    std::map<std::string, std::vector<std::string>> splits;

    // Dialogues of a split in corpus order; without a split manifest every
    // dialogue belongs to "train".
    Corpus split(const std::string& name) const;
    const CorpusDialogue* find(const std::string& dialogue_id) const;
    // Stable digest of the normalized content.
    std::uint64_t content_hash() const;
};

// Native schema:
// {task, dialogues:[{dialogue_id, problem_summary?, turns:[{speaker, text, strategies?}]}], splits?}
// Throws Error{"schema_violation"} naming the offending JSON path.
Corpus parse_corpus(const nlohmann::json& doc, Task task);

// ESConv release layout: [{emotion_type, problem_type, situation, dialog:[{speaker, content, annotation:{strategy}}]}]
Corpus parse_esconv(const nlohmann::json& doc);

// Persuasion-for-good annotated CSV (columns B2 dialogue id, B4 role, Unit text, er_label_1 strategy).
Corpus parse_p4g_csv(std::string_view csv_text);

// Detects the layout from the file (native JSON, ESConv JSON array or P4G CSV).
// A sibling "<file>.splits.json" manifest, when present, supplies splits.
Corpus load_corpus(const std::filesystem::path& path, Task task);

nlohmann::json to_json(const Corpus& corpus);

std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace dialcoord
