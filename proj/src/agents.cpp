#include "dialcoord/agents.hpp"

#include <algorithm>
#include <cctype>
#include <future>
#include <regex>

#include "dialcoord/error.hpp"

namespace dialcoord {

namespace {

std::string history_text(const AspectConfig& aspect, const DialogueHistory& history, const AgentOptions& options) {
    if (options.max_history_chars > 0) {
        return render_history(truncate_history(history, aspect.speaker_labels, options.max_history_chars),
                              aspect.speaker_labels);
    }
    return render_history(history, aspect.speaker_labels);
}

bool icontains(std::string_view haystack, std::string_view needle) {
    auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(), [](char a, char b) {
        return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
    });
    return it != haystack.end();
}

// "X (strategy: reflection of feelings)" -> "X"; "[Question] X" -> "X".
std::string strip_strategy_tags(std::string item) {
    auto is_close = [](char c) { return c == ')' || c == ']'; };
    auto open_of = [](char c) { return c == ')' ? '(' : '['; };

    // leading tag
    item = trim(item);
    if (!item.empty() && (item.front() == '[' || item.front() == '(')) {
        const char close = item.front() == '[' ? ']' : ')';
        auto end = item.find(close);
        if (end != std::string::npos) {
            auto inner = std::string_view(item).substr(1, end - 1);
            if (icontains(inner, "strateg") || item.front() == '[') {
                std::string rest = trim(std::string_view(item).substr(end + 1));
                if (!rest.empty() && (rest.front() == ':' || rest.front() == '-')) rest = trim(rest.substr(1));
                if (!rest.empty()) item = rest;
            }
        }
    }
    // trailing tag(s)
    for (;;) {
        item = trim(item);
        if (item.empty() || !is_close(item.back())) break;
        const char open = open_of(item.back());
        auto start = item.rfind(open);
        if (start == std::string::npos || start == 0) break;
        auto inner = std::string_view(item).substr(start + 1, item.size() - start - 2);
        std::string before = trim(std::string_view(item).substr(0, start));
        const bool tagged = icontains(inner, "strateg");
        const bool after_sentence = !before.empty() && std::string_view(".!?").find(before.back()) != std::string_view::npos;
        if ((tagged || after_sentence) && !before.empty()) {
            item = before;
        } else {
            break;
        }
    }
    // markdown emphasis and wrapping quotes
    item.erase(std::remove(item.begin(), item.end(), '*'), item.end());
    item = trim(item);
    if (item.size() >= 2 && item.front() == '"' && item.back() == '"') item = trim(item.substr(1, item.size() - 2));
    return item;
}

}  // namespace

std::vector<std::string> parse_numbered_list(std::string_view text) {
    static const std::regex line_re(R"(^\s*(?:[-*]\s*|\xE2\x80\xA2\s*)?(\d+)\s*[.)]\s*(.*)$)");
    std::vector<std::string> items;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        std::string line(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (std::regex_match(line, m, line_re)) {
            std::string item = strip_strategy_tags(m[2].str());
            if (!item.empty()) items.push_back(std::move(item));
        }
        if (end == std::string_view::npos) break;
        pos = end + 1;
    }
    return items;
}

std::string tracker_prompt(const AspectConfig& aspect, const DialogueHistory& history, const AgentOptions& options) {
    return aspect.tracker_template.instantiate({{"history", history_text(aspect, history, options)},
                                               {"m", number_word(aspect.candidate_count)}});
}

std::string promoter_prompt(const AspectConfig& aspect, const DialogueHistory& history, const StateSummary& summary,
                            const AgentOptions& options) {
    return aspect.promoter_template.instantiate({{"history", history_text(aspect, history, options)},
                                                {"m", number_word(aspect.candidate_count)},
                                                {"summary", collapse_newlines(summary.text)}});
}

StateSummary track_state(const AspectConfig& aspect, const DialogueHistory& history, Gateway& gateway,
                         const AgentOptions& options) {
    try {
        ChatRequest req;
        req.prompt = tracker_prompt(aspect, history, options);
        req.temperature = options.tracker_temperature;
        req.max_tokens = options.max_tokens;
        req.kind = aspect.tracker_template.template_id;
        StateSummary summary;
        summary.aspect_id = aspect.aspect_id;
        summary.text = trim(gateway.chat_complete(req));
        if (options.embed_summaries) summary.embedding = gateway.embed_text(summary.text).values;
        return summary;
    } catch (Error& e) {
        e.with_aspect(aspect.aspect_id);
        throw;
    }
}

std::vector<TopicCandidate> promote_aspect(const AspectConfig& aspect, const DialogueHistory& history,
                                           const StateSummary& summary, Gateway& gateway, const AgentOptions& options,
                                           std::string* raw_text) {
    if (summary.aspect_id != aspect.aspect_id) {
        throw Error("summary_mismatch", "summary belongs to aspect " + std::to_string(summary.aspect_id))
            .with_aspect(aspect.aspect_id);
    }
    try {
        ChatRequest req;
        req.prompt = promoter_prompt(aspect, history, summary, options);
        req.temperature = options.promoter_temperature;
        req.max_tokens = options.max_tokens;
        req.kind = aspect.promoter_template.template_id;
        std::string raw = gateway.chat_complete(req);
        auto items = parse_numbered_list(raw);
        if (raw_text != nullptr) *raw_text = raw;
        if (items.empty()) throw Error("unparseable_candidates", "no numbered items in promoter output");
        if (items.size() > static_cast<std::size_t>(aspect.candidate_count)) {
            items.resize(static_cast<std::size_t>(aspect.candidate_count));
        }
        std::vector<TopicCandidate> out;
        for (std::size_t j = 0; j < items.size(); ++j) {
            TopicCandidate c;
            c.aspect_id = aspect.aspect_id;
            c.candidate_index = static_cast<int>(j) + 1;
            c.text = cap_candidate_text(items[j]);
            out.push_back(std::move(c));
        }
        return out;
    } catch (Error& e) {
        e.with_aspect(aspect.aspect_id);
        throw;
    }
}

std::vector<AgentOutput> run_all_agents(const std::vector<AspectConfig>& aspects, const DialogueHistory& history,
                                        Gateway& gateway, const AgentOptions& options) {
    if (aspects.empty()) throw Error("invalid_aspects", "at least one aspect is required");
    if (history.empty()) throw Error("empty_history", "agents need a non-empty history");

    auto run_one = [&](const AspectConfig& aspect) {
        AgentOutput out;
        out.aspect_id = aspect.aspect_id;
        out.summary = track_state(aspect, history, gateway, options);
        out.candidates = promote_aspect(aspect, history, out.summary, gateway, options, &out.raw_promoter_text);
        return out;
    };

    std::vector<AgentOutput> outputs;
    outputs.reserve(aspects.size());
    if (!options.parallel || aspects.size() == 1) {
        for (const auto& a : aspects) outputs.push_back(run_one(a));
        return outputs;
    }
    std::vector<std::future<AgentOutput>> futures;
    futures.reserve(aspects.size());
    for (const auto& a : aspects) futures.push_back(std::async(std::launch::async, run_one, std::cref(a)));
    // Join everything before surfacing the first failure.
    std::exception_ptr first_error;
    for (auto& f : futures) {
        try {
            outputs.push_back(f.get());
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return outputs;
}

}  // namespace dialcoord
