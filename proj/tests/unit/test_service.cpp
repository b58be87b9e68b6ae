#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <thread>

#include "dialcoord/config.hpp"
#include "dialcoord/error.hpp"
#include "dialcoord/service.hpp"

using namespace dialcoord;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kDim = 16;

std::string error_code(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

// Mock chat whose generation call waits until released, or fails when told to.
class GatedChat : public ChatProvider {
public:
    std::string complete(const ChatRequest& r) override {
        if (r.kind.ends_with("/generate")) {
            entered = true;
            while (hold) std::this_thread::sleep_for(std::chrono::milliseconds(1));
            if (fail) throw Error("provider_error", "scripted failure");
        }
        return mock_.complete(r);
    }
    std::atomic<bool> hold{false};
    std::atomic<bool> entered{false};
    std::atomic<bool> fail{false};

private:
    MockChatProvider mock_;
};

std::shared_ptr<const Engine> esc_engine(std::shared_ptr<ChatProvider> chat = std::make_shared<MockChatProvider>()) {
    GatewayOptions o;
    o.embedding_dim = kDim;
    o.retry.max_attempts = 1;
    auto g = std::make_shared<Gateway>(std::move(chat), std::make_shared<MockEmbeddingProvider>(kDim), o);
    EngineOptions eo;
    eo.clock = fake_clock();
    return std::make_shared<Engine>(load_task_profile(Task::esc, default_templates_dir()), g,
                                    std::make_shared<EngineModel>(EngineModel::synthetic(3, kDim, 5)), eo);
}

SessionManagerOptions fixed_options(fs::path log = {}) {
    SessionManagerOptions o;
    o.event_log = std::move(log);
    o.id_seed = 42;
    o.now = [] { return std::string("2026-01-01T00:00:00Z"); };
    return o;
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("dialcoord_service_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("sessions record turns and traces") {
    SessionManager m({{Task::esc, esc_engine()}}, fixed_options());
    const auto id = m.create_session("esc");
    CHECK(m.session_ids() == std::vector<std::string>{id});

    const auto t1 = m.post_user_message(id, "I have been so stressed at work.");
    const auto t2 = m.post_user_message(id, "My boss keeps piling on tasks.");
    CHECK(t1.round == 1);
    CHECK(t2.round == 2);

    const auto s = m.snapshot(id);
    REQUIRE(s.history.size() == 4);
    CHECK(s.history.utterances()[1].text == t1.utterance);
    CHECK(s.history.utterances()[3].speaker == Speaker::system_role);
    CHECK(s.created_at == "2026-01-01T00:00:00Z");

    CHECK(m.get_traces(id).size() == 2);
    CHECK(m.get_traces(id, 2).front().user_message == "My boss keeps piling on tasks.");
}

TEST_CASE("session manager errors") {
    SessionManager m({{Task::esc, esc_engine()}}, fixed_options());
    CHECK(error_code([&] { m.create_session("chitchat"); }) == "unknown_task");
    CHECK(error_code([&] { m.create_session("persuasion"); }) == "model_not_loaded");
    CHECK(error_code([&] { m.post_user_message("nope", "hi"); }) == "session_not_found");
    CHECK(error_code([&] { m.snapshot("nope"); }) == "session_not_found");
    const auto id = m.create_session("esc");
    CHECK(error_code([&] { m.post_user_message(id, "  \n"); }) == "empty_utterance");
    CHECK(error_code([&] { m.get_traces(id, 1); }) == "round_not_found");
}

TEST_CASE("ids are reproducible under a fixed seed") {
    SessionManager a({{Task::esc, esc_engine()}}, fixed_options());
    SessionManager b({{Task::esc, esc_engine()}}, fixed_options());
    CHECK(a.create_session("esc") == b.create_session("esc"));
    CHECK(a.create_session("esc") != a.session_ids().front());
}

TEST_CASE("a second post during a running turn is rejected") {
    auto chat = std::make_shared<GatedChat>();
    chat->hold = true;
    SessionManager m({{Task::esc, esc_engine(chat)}}, fixed_options());
    const auto id = m.create_session("esc");
    auto first = std::async(std::launch::async, [&] { return m.post_user_message(id, "first message"); });
    while (!chat->entered) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    CHECK(error_code([&] { m.post_user_message(id, "second message"); }) == "turn_in_progress");
    chat->hold = false;
    CHECK(first.get().round == 1);
    CHECK(m.snapshot(id).history.size() == 2);
}

TEST_CASE("a failed turn keeps the user message") {
    auto chat = std::make_shared<GatedChat>();
    chat->fail = true;
    SessionManager m({{Task::esc, esc_engine(chat)}}, fixed_options());
    const auto id = m.create_session("esc");
    try {
        m.post_user_message(id, "hello?");
        FAIL("expected a failure");
    } catch (const Error& e) {
        CHECK(e.code() == "provider_error");
        CHECK(e.stage() == "generation");
    }
    const auto s = m.snapshot(id);
    REQUIRE(s.history.size() == 1);
    CHECK(s.history.utterances()[0].text == "hello?");
    CHECK(s.traces.empty());
}

TEST_CASE("the event log restores sessions") {
    const auto dir = scratch("replay");
    const auto log = dir / "events.jsonl";
    std::string id;
    TurnTrace trace;
    {
        SessionManager m({{Task::esc, esc_engine()}}, fixed_options(log));
        id = m.create_session("esc");
        trace = m.post_user_message(id, "I lost my job last week.");
    }
    {
        // a torn trailing line is skipped
        std::ofstream out(log, std::ios::app);
        out << "{\"event\": \"user_mes";
    }
    SessionManager restored({{Task::esc, esc_engine()}}, fixed_options(log));
    REQUIRE(restored.session_ids() == std::vector<std::string>{id});
    const auto s = restored.snapshot(id);
    CHECK(s.history.size() == 2);
    CHECK(s.history.utterances()[1].text == trace.utterance);
    REQUIRE(s.traces.size() == 1);
    CHECK(to_json(s.traces[0]) == to_json(trace));
    // new ids do not collide with restored ones
    CHECK(restored.create_session("esc") != id);
    fs::remove_all(dir);
}

TEST_CASE("replaying user messages on a fresh mock stack reproduces the transcript") {
    const std::vector<std::string> messages = {"I lost my job last week.", "I keep worrying about rent.",
                                               "Maybe I should call my sister."};
    auto run = [&] {
        SessionManager m({{Task::esc, esc_engine()}}, fixed_options());
        const auto id = m.create_session("esc");
        json doc = json::array();
        for (const auto& msg : messages) doc.push_back(to_json(m.post_user_message(id, msg)));
        return doc.dump();
    };
    CHECK(run() == run());
}

TEST_CASE("error codes map to HTTP statuses") {
    CHECK(http_status_for("unknown_task") == 400);
    CHECK(http_status_for("empty_utterance") == 400);
    CHECK(http_status_for("session_not_found") == 404);
    CHECK(http_status_for("round_not_found") == 404);
    CHECK(http_status_for("turn_in_progress") == 409);
    CHECK(http_status_for("model_not_loaded") == 503);
    CHECK(http_status_for("provider_timeout") == 502);
    CHECK(http_status_for("numeric_overflow") == 500);

    Error e("provider_error", "boom");
    e.with_stage("agents").with_aspect(2);
    const auto body = error_body(e);
    CHECK(body["error"]["code"] == "provider_error");
    CHECK(body["error"]["stage"] == "agents");
    CHECK(body["error"]["aspect_id"] == 2);
    CHECK(error_body(std::runtime_error("x"))["error"]["code"] == "internal_error");
}

TEST_CASE("HTTP endpoints") {
    auto chat = std::make_shared<GatedChat>();
    SessionManager m({{Task::esc, esc_engine(chat)}}, fixed_options());
    HttpService svc(m);
    const int port = svc.bind_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server([&] { svc.listen_after_bind(); });
    svc.wait_until_ready();
    httplib::Client cli("127.0.0.1", port);

    auto health = cli.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

    auto preflight = cli.Options("/sessions");
    REQUIRE(preflight);
    CHECK(preflight->status == 204);

    auto created = cli.Post("/sessions", R"({"task":"esc"})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const std::string id = json::parse(created->body)["session_id"];

    auto bad_task = cli.Post("/sessions", R"({"task":"chitchat"})", "application/json");
    CHECK(bad_task->status == 400);
    CHECK(json::parse(bad_task->body)["error"]["code"] == "unknown_task");
    CHECK(cli.Post("/sessions", "not json", "application/json")->status == 400);
    CHECK(cli.Post("/sessions", R"({"task":3})", "application/json")->status == 400);

    auto turn = cli.Post("/sessions/" + id + "/messages", R"({"text":"I feel lonely lately."})", "application/json");
    REQUIRE(turn);
    CHECK(turn->status == 200);
    const auto trace = json::parse(turn->body);
    CHECK(trace["round"] == 1);
    CHECK(trace["top_k"].size() == 3);
    CHECK(trace["timings"].size() == 4);

    auto all = cli.Get("/sessions/" + id + "/trace");
    CHECK(json::parse(all->body)["traces"].size() == 1);
    auto one = cli.Get("/sessions/" + id + "/trace?round=1");
    CHECK(json::parse(one->body) == trace);
    CHECK(cli.Get("/sessions/" + id + "/trace?round=9")->status == 404);
    CHECK(cli.Get("/sessions/" + id + "/trace?round=x")->status == 400);

    auto session = json::parse(cli.Get("/sessions/" + id)->body);
    CHECK(session["turns"].size() == 2);
    CHECK(session["turns"][0]["speaker"] == "user");
    CHECK(json::parse(cli.Get("/sessions")->body)["sessions"].size() == 1);

    CHECK(cli.Get("/sessions/missing")->status == 404);
    CHECK(cli.Post("/sessions/missing/messages", R"({"text":"hi"})", "application/json")->status == 404);
    CHECK(cli.Post("/sessions/" + id + "/messages", R"({"text":""})", "application/json")->status == 400);

    // concurrent post on a busy session
    chat->hold = true;
    chat->entered = false;
    auto busy = std::async(std::launch::async, [&] {
        httplib::Client c2("127.0.0.1", port);
        return c2.Post("/sessions/" + id + "/messages", R"({"text":"still there?"})", "application/json")->status;
    });
    while (!chat->entered) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    CHECK(cli.Post("/sessions/" + id + "/messages", R"({"text":"hello"})", "application/json")->status == 409);
    chat->hold = false;
    CHECK(busy.get() == 200);

    // provider failure surfaces as 502 with stage attribution
    chat->fail = true;
    auto failed = cli.Post("/sessions/" + id + "/messages", R"({"text":"and now?"})", "application/json");
    CHECK(failed->status == 502);
    CHECK(json::parse(failed->body)["error"]["stage"] == "generation");

    svc.stop();
    server.join();
}
