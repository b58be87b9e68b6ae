#include "dialcoord/core.hpp"

#include <algorithm>
#include <cctype>

#include "dialcoord/error.hpp"

namespace dialcoord {

std::string_view to_string(Task task) {
    return task == Task::esc ? "esc" : "persuasion";
}

Task parse_task(std::string_view name) {
    if (name == "esc") return Task::esc;
    if (name == "persuasion" || name == "p4g") return Task::persuasion;
    throw Error("unknown_task", "unknown task '" + std::string(name) + "'");
}

std::string trim(std::string_view text) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    auto first = std::find_if_not(text.begin(), text.end(), is_space);
    auto last = std::find_if_not(text.rbegin(), text.rend(), is_space).base();
    if (first >= last) return {};
    return std::string(first, last);
}

std::string collapse_newlines(std::string_view text) {
    std::string out(text);
    for (auto& c : out) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return out;
}

std::string cap_candidate_text(std::string_view text) {
    if (text.size() <= kMaxCandidateChars) return std::string(text);
    std::size_t cut = kMaxCandidateChars;
    // back off continuation bytes (10xxxxxx)
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return std::string(text.substr(0, cut));
}

const Utterance& DialogueHistory::append(Speaker speaker, std::string text) {
    if (trim(text).empty()) throw Error("empty_utterance", "utterance text is blank");
    int index = utterances_.empty() ? 0 : utterances_.back().turn_index + 1;
    utterances_.push_back(Utterance{speaker, std::move(text), index});
    return utterances_.back();
}

int DialogueHistory::round() const {
    return 1 + static_cast<int>(std::count_if(utterances_.begin(), utterances_.end(), [](const Utterance& u) {
               return u.speaker == Speaker::system_role;
           }));
}

DialogueHistory DialogueHistory::prefix(std::size_t count) const {
    DialogueHistory out(task_);
    count = std::min(count, utterances_.size());
    out.utterances_.assign(utterances_.begin(), utterances_.begin() + static_cast<std::ptrdiff_t>(count));
    return out;
}

DialogueHistory DialogueHistory::suffix_from(std::size_t first) const {
    DialogueHistory out(task_);
    first = std::min(first, utterances_.size());
    out.utterances_.assign(utterances_.begin() + static_cast<std::ptrdiff_t>(first), utterances_.end());
    return out;
}

namespace {

std::string render_line(const Utterance& u, const SpeakerLabels& labels) {
    return labels.of(u.speaker) + ": " + collapse_newlines(u.text);
}

}  // namespace

std::string render_history(const DialogueHistory& history, const SpeakerLabels& labels) {
    if (history.empty()) throw Error("empty_history", "cannot render an empty dialogue history");
    std::string out;
    for (const auto& u : history.utterances()) {
        if (!out.empty()) out += '\n';
        out += render_line(u, labels);
    }
    return out;
}

DialogueHistory truncate_history(const DialogueHistory& history, const SpeakerLabels& labels,
                                 std::size_t max_chars) {
    if (max_chars == 0) throw Error("invalid_argument", "max_chars must be positive");
    if (history.empty()) return history;

    const auto& utts = history.utterances();
    // Walk backwards accumulating line lengths (+1 for each joining newline).
    std::size_t total = 0;
    std::size_t keep_from = utts.size();
    for (std::size_t i = utts.size(); i-- > 0;) {
        std::size_t line = render_line(utts[i], labels).size();
        std::size_t next = total + line + (keep_from == utts.size() ? 0 : 1);
        if (next > max_chars) break;
        total = next;
        keep_from = i;
    }
    if (keep_from == utts.size()) {
        throw Error("oversize_turn", "final utterance alone exceeds " + std::to_string(max_chars) + " chars");
    }
    if (keep_from == 0) return history;
    return history.suffix_from(keep_from);
}

}  // namespace dialcoord
