#include "dialcoord/annotation.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dialcoord/error.hpp"

namespace dialcoord {

using json = nlohmann::json;
namespace fs = std::filesystem;

bool AnnotatedTurn::operator==(const AnnotatedTurn& o) const { return to_json(*this) == to_json(o); }

json to_json(const AnnotatedTurn& t) {
    json summaries = json::array();
    for (const auto& s : t.summaries) summaries.push_back({{"aspect_id", s.aspect_id}, {"text", s.text}});
    json candidates = json::array();
    for (std::size_t i = 0; i < t.candidates.size(); ++i) {
        const auto& c = t.candidates[i];
        json jc = {{"aspect_id", c.aspect_id}, {"candidate_index", c.candidate_index}, {"text", c.text}};
        if (i < t.labels.size()) jc["label"] = t.labels[i].position;
        candidates.push_back(std::move(jc));
    }
    return {{"dialogue_id", t.dialogue_id},
            {"round", t.round},
            {"history", t.history},
            {"summaries", std::move(summaries)},
            {"candidates", std::move(candidates)},
            {"gt_utterance", t.gt_utterance},
            {"gt_aspects", t.gt_aspects},
            {"gt_strategies", t.gt_strategies}};
}

AnnotatedTurn annotated_turn_from_json(const json& doc) {
    try {
        AnnotatedTurn t;
        t.dialogue_id = doc.at("dialogue_id").get<std::string>();
        t.round = doc.at("round").get<int>();
        t.history = doc.at("history").get<std::string>();
        for (const auto& s : doc.at("summaries")) {
            t.summaries.push_back({s.at("aspect_id").get<int>(), s.at("text").get<std::string>(), std::nullopt});
        }
        for (const auto& c : doc.at("candidates")) {
            TopicCandidate cand;
            cand.aspect_id = c.at("aspect_id").get<int>();
            cand.candidate_index = c.at("candidate_index").get<int>();
            cand.text = c.at("text").get<std::string>();
            t.labels.push_back({cand.aspect_id, cand.candidate_index, c.at("label").get<int>()});
            t.candidates.push_back(std::move(cand));
        }
        t.gt_utterance = doc.at("gt_utterance").get<std::string>();
        t.gt_aspects = doc.at("gt_aspects").get<AspectSet>();
        t.gt_strategies = doc.value("gt_strategies", std::vector<std::string>{});
        return t;
    } catch (const json::exception& e) {
        throw Error("schema_violation", std::string("annotation record: ") + e.what());
    }
}

json AnnotationReport::to_json() const {
    json f = json::array();
    for (const auto& x : failures) {
        f.push_back({{"dialogue_id", x.dialogue_id}, {"round", x.round}, {"code", x.code}, {"message", x.message}});
    }
    return {{"written", written},
            {"already_present", already_present},
            {"skipped_no_history", skipped_no_history},
            {"failures", std::move(f)}};
}

std::vector<AnnotatedTurn> annotate_dialogue(const CorpusDialogue& dialogue, const TaskProfile& profile,
                                             Gateway& gateway, const AgentOptions& options,
                                             AnnotationReport* report,
                                             const std::set<std::pair<std::string, int>>& skip) {
    std::vector<AnnotatedTurn> out;
    const DialogueHistory full = dialogue.history(profile.task);
    int round = 0;
    for (std::size_t i = 0; i < dialogue.turns.size(); ++i) {
        const auto& turn = dialogue.turns[i];
        if (turn.speaker != Speaker::system_role) continue;
        ++round;
        if (skip.contains({dialogue.dialogue_id, round})) {
            if (report) ++report->already_present;
            continue;
        }
        // An opening system turn has no context to analyze.
        if (i == 0) {
            if (report) ++report->skipped_no_history;
            continue;
        }
        const DialogueHistory prefix = full.prefix(i);
        try {
            AnnotatedTurn a;
            a.dialogue_id = dialogue.dialogue_id;
            a.round = round;
            a.history = render_history(prefix, profile.labels);
            AgentOptions opts = options;
            opts.embed_summaries = false;
            for (auto& agent : run_all_agents(profile.aspects, prefix, gateway, opts)) {
                a.summaries.push_back(std::move(agent.summary));
                for (auto& c : agent.candidates) a.candidates.push_back(std::move(c));
            }
            a.gt_utterance = turn.text;
            a.gt_strategies = turn.strategies;
            a.gt_aspects = profile.strategies.lookup_all(turn.strategies);
            a.labels = build_rank_labels(a.candidates, a.gt_utterance, a.gt_aspects, gateway);
            out.push_back(std::move(a));
        } catch (const Error& e) {
            spdlog::warn("annotation failed for {} round {}: {}", dialogue.dialogue_id, round, e.what());
            if (report) report->failures.push_back({dialogue.dialogue_id, round, e.code(), e.what()});
        }
    }
    return out;
}

namespace {

// Reads complete records; drops a torn trailing line left by an interrupted write.
std::vector<AnnotatedTurn> read_records(const fs::path& file, bool repair) {
    std::vector<AnnotatedTurn> out;
    if (!fs::exists(file)) return out;
    std::ifstream in(file, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::size_t good_end = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        if (nl == std::string::npos) break;
        const std::string line = content.substr(pos, nl - pos);
        if (!trim(line).empty()) {
            json doc;
            try {
                doc = json::parse(line);
            } catch (const json::exception& e) {
                throw Error("schema_violation", file.string() + ": bad record at byte " + std::to_string(pos));
            }
            out.push_back(annotated_turn_from_json(doc));
        }
        pos = nl + 1;
        good_end = pos;
    }
    if (good_end < content.size()) {
        spdlog::warn("{}: discarding incomplete trailing record", file.string());
        if (repair) fs::resize_file(file, good_end);
    }
    return out;
}

}  // namespace

std::vector<AnnotatedTurn> read_annotations(const fs::path& file) {
    if (!fs::exists(file)) throw Error("io_error", "no annotation file at " + file.string());
    return read_records(file, false);
}

AnnotationReport annotate_corpus(const Corpus& corpus, const TaskProfile& profile, Gateway& gateway,
                                 const fs::path& out_file, const AgentOptions& options) {
    if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
    std::set<std::pair<std::string, int>> done;
    for (const auto& t : read_records(out_file, true)) done.insert({t.dialogue_id, t.round});

    AnnotationReport report;
    std::ofstream out(out_file, std::ios::binary | std::ios::app);
    if (!out) throw Error("io_error", "cannot write " + out_file.string());
    for (const auto& dialogue : corpus.dialogues) {
        for (const auto& t : annotate_dialogue(dialogue, profile, gateway, options, &report, done)) {
            out << to_json(t).dump() << '\n';
            out.flush();
            ++report.written;
        }
    }
    return report;
}

TargetStateCorpus build_target_corpus(const Corpus& corpus, const AspectConfig& aspect, Gateway& gateway,
                                      const AgentOptions& options) {
    std::vector<const CorpusDialogue*> order;
    for (const auto& d : corpus.dialogues) order.push_back(&d);
    std::sort(order.begin(), order.end(),
              [](const auto* a, const auto* b) { return a->dialogue_id < b->dialogue_id; });

    TargetStateCorpus out;
    out.aspect_id = aspect.aspect_id;
    std::vector<Vec> rows;
    AgentOptions opts = options;
    opts.embed_summaries = true;
    for (const auto* d : order) {
        try {
            const auto summary = track_state(aspect, d->history(corpus.task), gateway, opts);
            rows.push_back(*summary.embedding);
            out.source_dialogue_ids.push_back(d->dialogue_id);
        } catch (const Error& e) {
            spdlog::warn("target corpus: skipping dialogue {} for aspect {}: {}", d->dialogue_id, aspect.aspect_id,
                         e.what());
            out.skipped_dialogue_ids.push_back(d->dialogue_id);
        }
    }
    if (!order.empty() && out.skipped_dialogue_ids.size() * 10 > order.size()) {
        throw Error("too_many_failures", std::to_string(out.skipped_dialogue_ids.size()) + " of " +
                                             std::to_string(order.size()) + " dialogues failed")
            .with_aspect(aspect.aspect_id);
    }
    const std::size_t dim = rows.empty() ? gateway.embedding_dim() : rows.front().size();
    out.embeddings = Matrix(rows.size(), dim);
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), out.embeddings.row(r).begin());
    return out;
}

TrainingTurn to_training_turn(const AnnotatedTurn& turn, std::size_t aspect_count, Gateway& gateway) {
    if (turn.summaries.size() != aspect_count) {
        throw Error("signal_count_mismatch", "annotated turn has " + std::to_string(turn.summaries.size()) +
                                                 " summaries, model expects " + std::to_string(aspect_count));
    }
    std::vector<const StateSummary*> ordered;
    for (const auto& s : turn.summaries) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) { return a->aspect_id < b->aspect_id; });
    TrainingTurn out;
    for (const auto* s : ordered) {
        out.features.states.push_back(s->embedding ? *s->embedding : gateway.embed_text(s->text).values);
    }
    for (std::size_t i = 0; i < turn.candidates.size(); ++i) {
        const auto& c = turn.candidates[i];
        out.features.contexts.push_back(gateway.embed_text(turn.history + " [TOPIC] " + c.text).values);
        out.labels.push_back(turn.labels.at(i).position);
        out.relevant.push_back(turn.gt_aspects.contains(c.aspect_id));
    }
    return out;
}

}  // namespace dialcoord
