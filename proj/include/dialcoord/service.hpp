#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialcoord/pipeline.hpp"

namespace httplib {
class Server;
}

namespace dialcoord {

struct Session {
    std::string session_id;
    Task task = Task::esc;
    DialogueHistory history;
    std::vector<TurnTrace> traces;
    std::string created_at;
};

struct SessionManagerOptions {
    // Append-only event log; empty keeps sessions in memory only.
    std::filesystem::path event_log;
    // Seeds session id generation; random when unset.
    std::optional<std::uint64_t> id_seed;
    // ISO-8601 timestamp source, replaceable for reproducible logs.
    std::function<std::string()> now;
};

// Owns sessions and routes turns to the task's engine. At most one turn per
// session runs at a time; a concurrent post fails with "turn_in_progress".
class SessionManager {
public:
    SessionManager(std::map<Task, std::shared_ptr<const Engine>> engines, SessionManagerOptions options = {});
    ~SessionManager();

    // "unknown_task" for a bad name, "model_not_loaded" when no engine serves it.
    std::string create_session(std::string_view task);

    // Appends the user turn, runs the pipeline and appends the system turn.
    // On a pipeline failure the user turn stays recorded and the error
    // (with stage attribution) propagates.
    TurnTrace post_user_message(const std::string& session_id, const std::string& text);

    // All traces, or the one for the given round ("round_not_found").
    std::vector<TurnTrace> get_traces(const std::string& session_id, std::optional<int> round = std::nullopt) const;

    // Copy of the session state ("session_not_found").
    Session snapshot(const std::string& session_id) const;
    std::vector<std::string> session_ids() const;

private:
    struct Entry;

    std::shared_ptr<Entry> find(const std::string& session_id) const;
    void log_event(const nlohmann::json& event);
    void replay_log();
    std::string next_id();

    std::map<Task, std::shared_ptr<const Engine>> engines_;
    SessionManagerOptions options_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::mutex log_mutex_;
    std::uint64_t id_state_ = 0;
};

// HTTP status for an error code.
int http_status_for(const std::string& code);
nlohmann::json error_body(const std::exception& e);

// POST /sessions, POST /sessions/{id}/messages, GET /sessions/{id}/trace[?round=n],
// GET /sessions/{id}, GET /sessions, GET /healthz.
class HttpService {
public:
    explicit HttpService(SessionManager& sessions);
    ~HttpService();

    // Blocks until stop().
    bool listen(const std::string& host, int port);
    // Binds an ephemeral port and returns it; call listen_after_bind() next.
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    SessionManager& sessions_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace dialcoord
