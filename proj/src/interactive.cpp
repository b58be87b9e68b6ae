#include "dialcoord/interactive.hpp"

#include <algorithm>
#include <regex>

#include <spdlog/spdlog.h>

#include "dialcoord/error.hpp"
#include "dialcoord/metrics.hpp"

namespace dialcoord {

using json = nlohmann::json;

namespace {

constexpr std::string_view kNoHistoryYet = "(The conversation has not started yet.)";

std::string history_or_placeholder(const DialogueHistory& history, const SpeakerLabels& labels) {
    return history.empty() ? std::string(kNoHistoryYet) : render_history(history, labels);
}

}  // namespace

std::string_view to_string(TerminationReason reason) {
    return reason == TerminationReason::repetition ? "repetition" : "max_rounds";
}

int SessionTranscript::rounds() const {
    return static_cast<int>(std::count_if(history.utterances().begin(), history.utterances().end(),
                                          [](const auto& u) { return u.speaker == Speaker::system_role; }));
}

json to_json(const SessionTranscript& t) {
    json turns = json::array();
    for (const auto& u : t.history.utterances()) {
        turns.push_back({{"speaker", u.speaker == Speaker::system_role ? "system" : "user"}, {"text", u.text}});
    }
    json traces = json::array();
    for (const auto& tr : t.traces) traces.push_back(to_json(tr));
    return {{"task", std::string(to_string(t.task))},
            {"system", t.system_name},
            {"problem_summary", t.problem_summary},
            {"turns", std::move(turns)},
            {"traces", std::move(traces)},
            {"termination_reason", t.termination ? json(std::string(to_string(*t.termination))) : json(nullptr)},
            {"aborted", t.aborted},
            {"error", t.error}};
}

SessionTranscript session_transcript_from_json(const json& doc) {
    try {
        SessionTranscript t;
        t.task = parse_task(doc.at("task").get<std::string>());
        t.system_name = doc.value("system", "");
        t.problem_summary = doc.value("problem_summary", "");
        t.history = DialogueHistory(t.task);
        for (const auto& u : doc.at("turns")) {
            t.history.append(u.at("speaker").get<std::string>() == "system" ? Speaker::system_role : Speaker::user_role,
                             u.at("text").get<std::string>());
        }
        for (const auto& tr : doc.value("traces", json::array())) t.traces.push_back(turn_trace_from_json(tr));
        if (auto it = doc.find("termination_reason"); it != doc.end() && it->is_string()) {
            t.termination = it->get<std::string>() == "repetition" ? TerminationReason::repetition
                                                                   : TerminationReason::max_rounds;
        }
        t.aborted = doc.value("aborted", false);
        t.error = doc.value("error", "");
        return t;
    } catch (const json::exception& e) {
        throw Error("schema_violation", std::string("transcript: ") + e.what());
    }
}

std::optional<TerminationReason> should_terminate(const DialogueHistory& history, int max_rounds, double threshold) {
    for (Speaker who : {Speaker::system_role, Speaker::user_role}) {
        const std::string* last = nullptr;
        const std::string* before = nullptr;
        for (auto it = history.utterances().rbegin(); it != history.utterances().rend() && !before; ++it) {
            if (it->speaker != who) continue;
            (last ? before : last) = &it->text;
        }
        if (before && normalized_edit_similarity(*last, *before) >= threshold) return TerminationReason::repetition;
    }
    const auto rounds = std::count_if(history.utterances().begin(), history.utterances().end(),
                                      [](const auto& u) { return u.speaker == Speaker::system_role; });
    if (rounds >= max_rounds) return TerminationReason::max_rounds;
    return std::nullopt;
}

Utterance simulate_seeker(const TaskProfile& profile, const std::string& problem_summary,
                          const DialogueHistory& history, Gateway& gateway, double temperature) {
    if (profile.task != Task::esc) throw Error("unsupported_task", "the simulated seeker is defined for emotional support");
    const auto& tpl = profile.extra("seeker");
    ChatRequest req;
    req.prompt = tpl.instantiate({{"problem", problem_summary},
                                  {"history", history_or_placeholder(history, profile.labels)}});
    req.temperature = temperature;
    req.kind = tpl.template_id;
    const std::string text = trim(strip_speaker_label(gateway.chat_complete(req), profile.labels.user));
    if (text.empty()) throw Error("empty_generation", "seeker produced no text");
    return Utterance{Speaker::user_role, text, static_cast<int>(history.size())};
}

SystemFn make_engine_system(const Engine& engine) {
    return [&engine](const DialogueHistory& history) {
        auto trace = engine.run_turn(history);
        SystemReply r;
        r.text = trace.utterance;
        r.trace = std::move(trace);
        return r;
    };
}

SeekerFn make_llm_seeker(const TaskProfile& profile, std::string problem_summary, std::shared_ptr<Gateway> gateway) {
    return [&profile, problem = std::move(problem_summary), gateway](const DialogueHistory& history) {
        return simulate_seeker(profile, problem, history, *gateway).text;
    };
}

SessionTranscript run_interactive_session(const SystemFn& system, const SeekerFn& seeker, Task task,
                                          const std::string& problem_summary, int max_rounds) {
    SessionTranscript t;
    t.task = task;
    t.problem_summary = problem_summary;
    t.history = DialogueHistory(task);
    try {
        while (true) {
            t.history.append(Speaker::user_role, seeker(t.history));
            if ((t.termination = should_terminate(t.history, max_rounds))) break;
            auto reply = system(t.history);
            t.history.append(Speaker::system_role, reply.text);
            if (reply.trace) t.traces.push_back(std::move(*reply.trace));
            if ((t.termination = should_terminate(t.history, max_rounds))) break;
        }
    } catch (const std::exception& e) {
        spdlog::warn("interactive session aborted after {} rounds: {}", t.rounds(), e.what());
        t.aborted = true;
        t.error = e.what();
    }
    return t;
}

BaselineKind parse_baseline(std::string_view name) {
    if (name == "gpt35") return BaselineKind::gpt35;
    if (name == "gpt35_cot" || name == "cot") return BaselineKind::gpt35_cot;
    if (name == "mixinit") return BaselineKind::mixinit;
    throw Error("unknown_baseline", std::string(name));
}

std::optional<std::string> extract_cot_response(std::string_view completion) {
    const std::string text(completion);
    const auto start = text.find("[Response]");
    if (start == std::string::npos) return std::nullopt;
    const auto body = start + std::string_view("[Response]").size();
    auto end = text.find("[end]", body);
    if (end == std::string::npos) end = text.size();
    std::string out = trim(text.substr(body, end - body));
    if (out.empty()) return std::nullopt;
    return out;
}

std::string strip_mixinit_tag(std::string_view completion) {
    static const std::regex label(R"(^\s*[A-Za-z]+\s*:\s*)");
    static const std::regex tag(R"(^\s*\[\s*Strategy\s*:[^\]]*\]\s*)", std::regex::icase);
    std::string s(completion);
    s = std::regex_replace(s, label, "", std::regex_constants::format_first_only);
    s = std::regex_replace(s, tag, "", std::regex_constants::format_first_only);
    return trim(s);
}

Utterance run_baseline(BaselineKind kind, const TaskProfile& profile, const DialogueHistory& history,
                       Gateway& gateway, const BaselineContext& context, double temperature) {
    const char* name = kind == BaselineKind::gpt35 ? "baseline_gpt35"
                       : kind == BaselineKind::gpt35_cot ? "baseline_cot"
                                                         : "baseline_mixinit";
    const auto& tpl = profile.extra(name);
    TemplateValues values{{"history", render_history(history, profile.labels)},
                          {"problem", context.problem},
                          {"emotion_type", context.emotion_type},
                          {"problem_type", context.problem_type}};
    ChatRequest req;
    req.prompt = tpl.instantiate(values);
    req.temperature = temperature;
    req.max_tokens = kind == BaselineKind::gpt35_cot ? 512 : 256;
    req.kind = tpl.template_id;
    const std::string raw = gateway.chat_complete(req);

    std::string text;
    switch (kind) {
        case BaselineKind::gpt35:
            text = strip_speaker_label(raw, profile.labels.system);
            break;
        case BaselineKind::gpt35_cot:
            if (auto r = extract_cot_response(raw)) {
                text = *r;
            } else {
                spdlog::warn("chain-of-thought completion has no [Response] segment; returning it unchanged");
                text = trim(raw);
            }
            break;
        case BaselineKind::mixinit:
            text = strip_mixinit_tag(raw);
            break;
    }
    text = trim(text);
    if (text.empty()) throw Error("empty_generation", std::string(name) + " produced no text");
    return Utterance{Speaker::system_role, text, static_cast<int>(history.size())};
}

SystemFn make_baseline_system(BaselineKind kind, const TaskProfile& profile, std::shared_ptr<Gateway> gateway,
                              BaselineContext context) {
    return [kind, &profile, gateway, context = std::move(context)](const DialogueHistory& history) {
        return SystemReply{run_baseline(kind, profile, history, *gateway, context).text, std::nullopt};
    };
}

json AspectDistribution::to_json(const std::vector<std::string>& aspect_names) const {
    json rows_json = json::array();
    for (const auto& [round, row] : rows) rows_json.push_back({{"round", round}, {"proportions", row}});
    json out = {{"aspect_count", aspect_count}, {"rows", std::move(rows_json)}};
    if (!aspect_names.empty()) out["aspects"] = aspect_names;
    return out;
}

AspectDistribution aspect_distribution(const std::vector<std::pair<int, int>>& observations, int aspect_count,
                                       int max_round) {
    if (aspect_count < 1) throw Error("invalid_argument", "aspect_count must be positive");
    AspectDistribution d;
    d.aspect_count = aspect_count;
    std::map<int, Vec> counts;
    for (const auto& [round, aspect] : observations) {
        if (round < 1 || round > max_round) continue;
        if (aspect < 1 || aspect > aspect_count) throw Error("invalid_argument", "aspect id out of range");
        auto& row = counts[round];
        if (row.empty()) row.assign(static_cast<std::size_t>(aspect_count), 0.0);
        row[static_cast<std::size_t>(aspect - 1)] += 1.0;
    }
    for (auto& [round, row] : counts) {
        double total = 0.0;
        for (double c : row) total += c;
        for (double& c : row) c /= total;
        d.rows[round] = std::move(row);
    }
    return d;
}

AspectDistribution aspect_distribution(const std::vector<SessionTranscript>& transcripts, int aspect_count,
                                       int max_round) {
    std::vector<std::pair<int, int>> obs;
    for (const auto& t : transcripts) {
        for (const auto& tr : t.traces) {
            if (tr.prioritized_aspect > 0) obs.emplace_back(tr.round, tr.prioritized_aspect);
        }
    }
    return aspect_distribution(obs, aspect_count, max_round);
}

AspectDistribution aspect_distribution(const Corpus& corpus, const StrategyMap& strategies, int aspect_count,
                                       int max_round) {
    std::vector<std::pair<int, int>> obs;
    for (const auto& d : corpus.dialogues) {
        int round = 0;
        for (const auto& turn : d.turns) {
            if (turn.speaker != Speaker::system_role) continue;
            ++round;
            for (int a : strategies.lookup_all(turn.strategies)) obs.emplace_back(round, a);
        }
    }
    return aspect_distribution(obs, aspect_count, max_round);
}

}  // namespace dialcoord
