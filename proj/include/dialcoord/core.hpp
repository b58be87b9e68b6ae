#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dialcoord {

enum class Speaker { system_role, user_role };
enum class Task { esc, persuasion };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);  // throws Error{"unknown_task"}

struct Utterance {
    Speaker speaker = Speaker::user_role;
    std::string text;
    int turn_index = 0;
};

// Rendering labels: first = system side ("Supporter"), second = user side ("Seeker").
struct SpeakerLabels {
    std::string system;
    std::string user;

    const std::string& of(Speaker s) const { return s == Speaker::system_role ? system : user; }
};

class DialogueHistory {
public:
    DialogueHistory() = default;
    explicit DialogueHistory(Task task) : task_(task) {}

    // Appends with the next turn index. Throws "empty_utterance" when the
    // text is blank after trimming.
    const Utterance& append(Speaker speaker, std::string text);

    const std::vector<Utterance>& utterances() const noexcept { return utterances_; }
    bool empty() const noexcept { return utterances_.empty(); }
    std::size_t size() const noexcept { return utterances_.size(); }
    Task task() const noexcept { return task_; }

    // 1 + number of completed system turns.
    int round() const;

    // History containing utterances [0, count).
    DialogueHistory prefix(std::size_t count) const;
    // History containing utterances [first, size()).
    DialogueHistory suffix_from(std::size_t first) const;

private:
    Task task_ = Task::esc;
    std::vector<Utterance> utterances_;
};

struct StateSummary {
    int aspect_id = 0;
    std::string text;
    std::optional<std::vector<double>> embedding;
};

inline constexpr std::size_t kMaxCandidateChars = 400;

struct TopicCandidate {
    int aspect_id = 0;
    int candidate_index = 0;  // 1-based within its aspect
    std::string text;
    std::optional<double> score;
    std::optional<int> rank;
};

std::string trim(std::string_view text);
std::string collapse_newlines(std::string_view text);
// Truncates to at most kMaxCandidateChars bytes without splitting a UTF-8 sequence.
std::string cap_candidate_text(std::string_view text);

// One "Label: text" line per utterance, newline-joined.
std::string render_history(const DialogueHistory& history, const SpeakerLabels& labels);

// Drops the oldest utterances until the rendered history fits in max_chars.
DialogueHistory truncate_history(const DialogueHistory& history, const SpeakerLabels& labels,
                                 std::size_t max_chars);

}  // namespace dialcoord
