#include "dialcoord/service.hpp"

#include <httplib.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <random>

#include <spdlog/spdlog.h>

#include "dialcoord/error.hpp"
#include "dialcoord/hash.hpp"

namespace dialcoord {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct SessionManager::Entry {
    Session session;
    std::mutex state;      // guards session
    std::mutex turn;       // held for the whole turn
};

namespace {

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

SessionManager::SessionManager(std::map<Task, std::shared_ptr<const Engine>> engines, SessionManagerOptions options)
    : engines_(std::move(engines)), options_(std::move(options)) {
    if (!options_.now) options_.now = utc_now;
    id_state_ = options_.id_seed ? *options_.id_seed : (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^
                                                           std::random_device{}();
    replay_log();
}

SessionManager::~SessionManager() = default;

std::string SessionManager::next_id() {
    char buf[24];
    while (true) {
        std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(splitmix64(id_state_)));
        if (!sessions_.contains(buf)) return buf;
    }
}

void SessionManager::log_event(const json& event) {
    if (options_.event_log.empty()) return;
    std::lock_guard lock(log_mutex_);
    std::ofstream out(options_.event_log, std::ios::app | std::ios::binary);
    if (!out) throw Error("io_error", "cannot append to " + options_.event_log.string());
    out << event.dump() << '\n';
}

void SessionManager::replay_log() {
    if (options_.event_log.empty()) return;
    if (options_.event_log.has_parent_path()) fs::create_directories(options_.event_log.parent_path());
    if (!fs::exists(options_.event_log)) return;
    std::ifstream in(options_.event_log, std::ios::binary);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json ev;
        try {
            ev = json::parse(line);
        } catch (const json::exception&) {
            spdlog::warn("{}:{}: skipping unreadable event", options_.event_log.string(), lineno);
            continue;
        }
        const std::string type = ev.value("event", "");
        const std::string id = ev.value("session_id", "");
        if (type == "session_created") {
            auto e = std::make_shared<Entry>();
            e->session.session_id = id;
            e->session.task = parse_task(ev.at("task").get<std::string>());
            e->session.history = DialogueHistory(e->session.task);
            e->session.created_at = ev.value("created_at", "");
            sessions_[id] = std::move(e);
            continue;
        }
        auto it = sessions_.find(id);
        if (it == sessions_.end()) {
            spdlog::warn("{}:{}: event for unknown session {}", options_.event_log.string(), lineno, id);
            continue;
        }
        auto& s = it->second->session;
        if (type == "user_message") {
            s.history.append(Speaker::user_role, ev.at("text").get<std::string>());
        } else if (type == "turn_completed") {
            auto trace = turn_trace_from_json(ev.at("trace"));
            s.history.append(Speaker::system_role, trace.utterance);
            s.traces.push_back(std::move(trace));
        }
    }
    spdlog::info("restored {} sessions from {}", sessions_.size(), options_.event_log.string());
}

std::string SessionManager::create_session(std::string_view task_name) {
    const Task task = parse_task(task_name);
    if (!engines_.contains(task)) {
        throw Error("model_not_loaded", "no model loaded for task " + std::string(to_string(task)));
    }
    auto e = std::make_shared<Entry>();
    std::string id;
    {
        std::lock_guard lock(mutex_);
        id = next_id();
        e->session.session_id = id;
        e->session.task = task;
        e->session.history = DialogueHistory(task);
        e->session.created_at = options_.now();
        sessions_[id] = e;
    }
    log_event({{"event", "session_created"},
               {"session_id", id},
               {"task", std::string(to_string(task))},
               {"created_at", e->session.created_at}});
    return id;
}

std::shared_ptr<SessionManager::Entry> SessionManager::find(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error("session_not_found", "no session " + session_id);
    return it->second;
}

TurnTrace SessionManager::post_user_message(const std::string& session_id, const std::string& text) {
    auto entry = find(session_id);
    if (trim(text).empty()) throw Error("empty_utterance", "message text is empty");
    std::unique_lock turn(entry->turn, std::try_to_lock);
    if (!turn.owns_lock()) throw Error("turn_in_progress", "session " + session_id + " is already processing a turn");

    DialogueHistory history;
    {
        std::lock_guard lock(entry->state);
        entry->session.history.append(Speaker::user_role, text);
        history = entry->session.history;
    }
    log_event({{"event", "user_message"}, {"session_id", session_id}, {"text", text}});

    const auto& engine = engines_.at(entry->session.task);
    TurnTrace trace = engine->run_turn(history);
    {
        std::lock_guard lock(entry->state);
        entry->session.history.append(Speaker::system_role, trace.utterance);
        entry->session.traces.push_back(trace);
    }
    log_event({{"event", "turn_completed"}, {"session_id", session_id}, {"trace", to_json(trace)}});
    return trace;
}

std::vector<TurnTrace> SessionManager::get_traces(const std::string& session_id, std::optional<int> round) const {
    auto entry = find(session_id);
    std::lock_guard lock(entry->state);
    const auto& traces = entry->session.traces;
    if (!round) return traces;
    for (const auto& t : traces) {
        if (t.round == *round) return {t};
    }
    throw Error("round_not_found", "session " + session_id + " has no trace for round " + std::to_string(*round));
}

Session SessionManager::snapshot(const std::string& session_id) const {
    auto entry = find(session_id);
    std::lock_guard lock(entry->state);
    return entry->session;
}

std::vector<std::string> SessionManager::session_ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : sessions_) ids.push_back(id);
    return ids;
}

int http_status_for(const std::string& code) {
    static const std::map<std::string, int> table = {
        {"unknown_task", 400},       {"empty_utterance", 400},     {"invalid_request", 400},
        {"session_not_found", 404},  {"round_not_found", 404},     {"turn_in_progress", 409},
        {"model_not_loaded", 503},   {"provider_timeout", 502},    {"provider_rate_limited", 502},
        {"provider_error", 502},     {"malformed_response", 502},  {"unparseable_candidates", 502},
        {"empty_generation", 502},
    };
    auto it = table.find(code);
    return it == table.end() ? 500 : it->second;
}

json error_body(const std::exception& e) {
    json err;
    if (const auto* de = dynamic_cast<const Error*>(&e)) {
        err = {{"code", de->code()}, {"message", de->what()}};
        if (!de->stage().empty()) err["stage"] = de->stage();
        if (de->aspect_id() != 0) err["aspect_id"] = de->aspect_id();
    } else {
        err = {{"code", "internal_error"}, {"message", e.what()}};
    }
    return {{"error", std::move(err)}};
}

namespace {

json session_json(const Session& s) {
    json turns = json::array();
    for (const auto& u : s.history.utterances()) {
        turns.push_back({{"speaker", u.speaker == Speaker::system_role ? "system" : "user"}, {"text", u.text}});
    }
    json traces = json::array();
    for (const auto& t : s.traces) traces.push_back(to_json(t));
    return {{"session_id", s.session_id},
            {"task", std::string(to_string(s.task))},
            {"created_at", s.created_at},
            {"turns", std::move(turns)},
            {"traces", std::move(traces)}};
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        send_json(res, http_status_for(e.code()), error_body(e));
    } catch (const std::exception& e) {
        send_json(res, 500, error_body(e));
    }
}

json parse_body(const httplib::Request& req) {
    try {
        auto doc = json::parse(req.body);
        if (!doc.is_object()) throw Error("invalid_request", "body must be a JSON object");
        return doc;
    } catch (const json::exception& e) {
        throw Error("invalid_request", std::string("body is not valid JSON: ") + e.what());
    }
}

std::string string_field(const json& doc, const char* key) {
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_string()) throw Error("invalid_request", std::string("missing string field '") + key + "'");
    return it->get<std::string>();
}

}  // namespace

HttpService::HttpService(SessionManager& sessions) : sessions_(sessions), server_(std::make_unique<httplib::Server>()) {
    auto& s = *server_;
    s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    s.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"status", "ok"}}); });

    s.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"sessions", sessions_.session_ids()}});
    });

    s.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = parse_body(req);
            send_json(res, 201, {{"session_id", sessions_.create_session(string_field(body, "task"))}});
        });
    });

    s.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, session_json(sessions_.snapshot(req.matches[1]))); });
    });

    s.Post(R"(/sessions/([^/]+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = parse_body(req);
            send_json(res, 200, to_json(sessions_.post_user_message(req.matches[1], string_field(body, "text"))));
        });
    });

    s.Get(R"(/sessions/([^/]+)/trace)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            if (req.has_param("round")) {
                int round = 0;
                try {
                    round = std::stoi(req.get_param_value("round"));
                } catch (const std::exception&) {
                    throw Error("invalid_request", "round must be an integer");
                }
                send_json(res, 200, to_json(sessions_.get_traces(id, round).front()));
                return;
            }
            json traces = json::array();
            for (const auto& t : sessions_.get_traces(id)) traces.push_back(to_json(t));
            send_json(res, 200, {{"session_id", id}, {"traces", std::move(traces)}});
        });
    });
}

HttpService::~HttpService() = default;

bool HttpService::listen(const std::string& host, int port) { return server_->listen(host, port); }
int HttpService::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }
bool HttpService::listen_after_bind() { return server_->listen_after_bind(); }
void HttpService::stop() { server_->stop(); }
void HttpService::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace dialcoord
