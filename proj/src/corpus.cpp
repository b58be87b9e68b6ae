#include "dialcoord/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "dialcoord/error.hpp"
#include "dialcoord/hash.hpp"

namespace dialcoord {

using json = nlohmann::json;
namespace fs = std::filesystem;

DialogueHistory CorpusDialogue::history(Task task, std::size_t turn_count) const {
    DialogueHistory h(task);
    turn_count = std::min(turn_count, turns.size());
    for (std::size_t i = 0; i < turn_count; ++i) h.append(turns[i].speaker, turns[i].text);
    return h;
}

Corpus Corpus::split(const std::string& name) const {
    Corpus out;
    out.task = task;
    if (splits.empty()) {
        if (name == "train") out.dialogues = dialogues;
        return out;
    }
    auto it = splits.find(name);
    if (it == splits.end()) return out;
    const std::set<std::string> ids(it->second.begin(), it->second.end());
    for (const auto& d : dialogues) {
        if (ids.contains(d.dialogue_id)) out.dialogues.push_back(d);
    }
    return out;
}

const CorpusDialogue* Corpus::find(const std::string& dialogue_id) const {
    for (const auto& d : dialogues) {
        if (d.dialogue_id == dialogue_id) return &d;
    }
    return nullptr;
}

std::uint64_t Corpus::content_hash() const { return fnv1a64(to_json(*this).dump()); }

namespace {

[[noreturn]] void violation(const std::string& path, const std::string& what) {
    throw Error("schema_violation", path + ": " + what);
}

Speaker parse_speaker(const std::string& raw, const std::string& path) {
    std::string s = trim(raw);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "system" || s == "supporter" || s == "persuader" || s == "sys" || s == "therapist") {
        return Speaker::system_role;
    }
    if (s == "user" || s == "seeker" || s == "persuadee" || s == "usr" || s == "patient") return Speaker::user_role;
    violation(path, "unknown speaker '" + raw + "'");
}

const json& field(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) violation(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) violation(path + "/" + key, "missing required field");
    return *it;
}

std::string string_field(const json& obj, const char* key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_string()) violation(path + "/" + key, "expected a string");
    return v.get<std::string>();
}

std::optional<std::string> optional_string(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) violation(path + "/" + key, "expected a string");
    return it->get<std::string>();
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io_error", "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void validate_unique_ids(const Corpus& c) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < c.dialogues.size(); ++i) {
        if (!seen.insert(c.dialogues[i].dialogue_id).second) {
            violation("/dialogues/" + std::to_string(i) + "/dialogue_id",
                      "duplicate id '" + c.dialogues[i].dialogue_id + "'");
        }
    }
}

void parse_splits(const json& splits, Corpus& corpus, const std::string& path) {
    if (!splits.is_object()) violation(path, "expected an object of id lists");
    for (const auto& [name, ids] : splits.items()) {
        if (!ids.is_array()) violation(path + "/" + name, "expected an array of dialogue ids");
        auto& list = corpus.splits[name];
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i].is_string()) {
                list.push_back(ids[i].get<std::string>());
            } else if (ids[i].is_number_integer()) {
                list.push_back(std::to_string(ids[i].get<long long>()));
            } else {
                violation(path + "/" + name + "/" + std::to_string(i), "expected a dialogue id");
            }
        }
    }
}

}  // namespace

Corpus parse_corpus(const json& doc, Task task) {
    Corpus corpus;
    corpus.task = task;
    if (!doc.is_object()) violation("", "expected a corpus object");
    if (auto it = doc.find("task"); it != doc.end()) {
        if (!it->is_string()) violation("/task", "expected a string");
        try {
            if (parse_task(it->get<std::string>()) != task) violation("/task", "corpus is for a different task");
        } catch (const Error& e) {
            if (e.code() == "schema_violation") throw;
            violation("/task", e.what());
        }
    }
    const auto& dialogues = field(doc, "dialogues", "");
    if (!dialogues.is_array()) violation("/dialogues", "expected an array");
    for (std::size_t d = 0; d < dialogues.size(); ++d) {
        const std::string dpath = "/dialogues/" + std::to_string(d);
        const auto& jd = dialogues[d];
        CorpusDialogue dialogue;
        const auto& id = field(jd, "dialogue_id", dpath);
        if (id.is_string()) {
            dialogue.dialogue_id = id.get<std::string>();
        } else if (id.is_number_integer()) {
            dialogue.dialogue_id = std::to_string(id.get<long long>());
        } else {
            violation(dpath + "/dialogue_id", "expected a string or integer");
        }
        dialogue.problem_summary = optional_string(jd, "problem_summary", dpath);
        dialogue.emotion_type = optional_string(jd, "emotion_type", dpath);
        dialogue.problem_type = optional_string(jd, "problem_type", dpath);
        const auto& turns = field(jd, "turns", dpath);
        if (!turns.is_array()) violation(dpath + "/turns", "expected an array");
        for (std::size_t t = 0; t < turns.size(); ++t) {
            const std::string tpath = dpath + "/turns/" + std::to_string(t);
            CorpusTurn turn;
            turn.speaker = parse_speaker(string_field(turns[t], "speaker", tpath), tpath + "/speaker");
            turn.text = string_field(turns[t], "text", tpath);
            if (trim(turn.text).empty()) violation(tpath + "/text", "empty utterance");
            if (auto it = turns[t].find("strategies"); it != turns[t].end() && !it->is_null()) {
                if (!it->is_array()) violation(tpath + "/strategies", "expected an array of strings");
                for (std::size_t s = 0; s < it->size(); ++s) {
                    if (!(*it)[s].is_string()) violation(tpath + "/strategies/" + std::to_string(s), "expected a string");
                    turn.strategies.push_back((*it)[s].get<std::string>());
                }
                if (!turn.strategies.empty() && turn.speaker != Speaker::system_role) {
                    violation(tpath + "/strategies", "strategy tags are only allowed on system turns");
                }
            }
            dialogue.turns.push_back(std::move(turn));
        }
        corpus.dialogues.push_back(std::move(dialogue));
    }
    if (auto it = doc.find("splits"); it != doc.end() && !it->is_null()) parse_splits(*it, corpus, "/splits");
    validate_unique_ids(corpus);
    return corpus;
}

Corpus parse_esconv(const json& doc) {
    if (!doc.is_array()) violation("", "expected the ESConv array layout");
    Corpus corpus;
    corpus.task = Task::esc;
    for (std::size_t d = 0; d < doc.size(); ++d) {
        const std::string dpath = "/" + std::to_string(d);
        CorpusDialogue dialogue;
        dialogue.dialogue_id = std::to_string(d);
        dialogue.problem_summary = optional_string(doc[d], "situation", dpath);
        dialogue.emotion_type = optional_string(doc[d], "emotion_type", dpath);
        dialogue.problem_type = optional_string(doc[d], "problem_type", dpath);
        const auto& turns = field(doc[d], "dialog", dpath);
        if (!turns.is_array()) violation(dpath + "/dialog", "expected an array");
        for (std::size_t t = 0; t < turns.size(); ++t) {
            const std::string tpath = dpath + "/dialog/" + std::to_string(t);
            CorpusTurn turn;
            turn.speaker = parse_speaker(string_field(turns[t], "speaker", tpath), tpath + "/speaker");
            turn.text = trim(string_field(turns[t], "content", tpath));
            if (turn.text.empty()) continue;
            if (turn.speaker == Speaker::system_role) {
                if (auto a = turns[t].find("annotation"); a != turns[t].end() && a->is_object()) {
                    if (auto s = a->find("strategy"); s != a->end() && s->is_string()) {
                        turn.strategies.push_back(s->get<std::string>());
                    }
                }
            }
            dialogue.turns.push_back(std::move(turn));
        }
        corpus.dialogues.push_back(std::move(dialogue));
    }
    return corpus;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !cell.empty()) {
                row.push_back(std::move(cell));
                rows.push_back(std::move(row));
            }
            row.clear();
            cell.clear();
            any = false;
        } else {
            cell += c;
            any = true;
        }
    }
    if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

Corpus parse_p4g_csv(std::string_view csv_text) {
    const auto rows = parse_csv(csv_text);
    if (rows.empty()) violation("", "empty CSV");
    const auto& header = rows.front();
    auto column = [&](std::string_view name) -> std::ptrdiff_t {
        auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : it - header.begin();
    };
    const auto id_col = column("B2");
    const auto role_col = column("B4");
    const auto text_col = column("Unit");
    const auto strategy_col = column("er_label_1");
    if (id_col < 0 || role_col < 0 || text_col < 0) violation("/header", "expected columns B2, B4 and Unit");

    Corpus corpus;
    corpus.task = Task::persuasion;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        auto cell = [&](std::ptrdiff_t c) -> std::string {
            return c >= 0 && static_cast<std::size_t>(c) < row.size() ? trim(row[static_cast<std::size_t>(c)]) : "";
        };
        const std::string id = cell(id_col);
        const std::string text = cell(text_col);
        if (id.empty() || text.empty()) continue;
        if (corpus.dialogues.empty() || corpus.dialogues.back().dialogue_id != id) {
            if (corpus.find(id) != nullptr) violation("/" + std::to_string(r), "dialogue '" + id + "' is not contiguous");
            corpus.dialogues.push_back(CorpusDialogue{id, std::nullopt, std::nullopt, std::nullopt, {}});
        }
        CorpusTurn turn;
        const std::string role = cell(role_col);
        turn.speaker = role == "0" ? Speaker::system_role : Speaker::user_role;
        turn.text = text;
        if (turn.speaker == Speaker::system_role) {
            const std::string s = cell(strategy_col);
            if (!s.empty()) turn.strategies.push_back(s);
        }
        corpus.dialogues.back().turns.push_back(std::move(turn));
    }
    return corpus;
}

Corpus load_corpus(const fs::path& path, Task task) {
    const std::string text = read_file(path);
    Corpus corpus;
    if (path.extension() == ".csv") {
        corpus = parse_p4g_csv(text);
        if (task != Task::persuasion) violation("", "CSV corpora are persuasion dialogues");
    } else {
        json doc;
        try {
            doc = json::parse(text);
        } catch (const json::exception& e) {
            throw Error("schema_violation", std::string("not valid JSON: ") + e.what());
        }
        corpus = doc.is_array() ? parse_esconv(doc) : parse_corpus(doc, task);
        if (doc.is_array() && task != Task::esc) violation("", "the ESConv layout holds emotional-support dialogues");
    }
    const fs::path manifest = path.string() + ".splits.json";
    if (fs::exists(manifest)) {
        corpus.splits.clear();
        json splits;
        try {
            splits = json::parse(read_file(manifest));
        } catch (const json::exception& e) {
            throw Error("schema_violation", manifest.string() + ": " + e.what());
        }
        parse_splits(splits, corpus, manifest.string());
    }
    validate_unique_ids(corpus);
    return corpus;
}

json to_json(const Corpus& corpus) {
    json dialogues = json::array();
    for (const auto& d : corpus.dialogues) {
        json turns = json::array();
        for (const auto& t : d.turns) {
            json jt = {{"speaker", t.speaker == Speaker::system_role ? "system" : "user"}, {"text", t.text}};
            if (!t.strategies.empty()) jt["strategies"] = t.strategies;
            turns.push_back(std::move(jt));
        }
        json jd = {{"dialogue_id", d.dialogue_id}, {"turns", std::move(turns)}};
        if (d.problem_summary) jd["problem_summary"] = *d.problem_summary;
        if (d.emotion_type) jd["emotion_type"] = *d.emotion_type;
        if (d.problem_type) jd["problem_type"] = *d.problem_type;
        dialogues.push_back(std::move(jd));
    }
    json doc = {{"task", std::string(to_string(corpus.task))}, {"dialogues", std::move(dialogues)}};
    if (!corpus.splits.empty()) doc["splits"] = corpus.splits;
    return doc;
}

}  // namespace dialcoord
