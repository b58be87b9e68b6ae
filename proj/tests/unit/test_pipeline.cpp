#include <doctest.h>

#include <fstream>

#include "dialcoord/config.hpp"
#include "dialcoord/error.hpp"
#include "dialcoord/pipeline.hpp"

using namespace dialcoord;
using json = nlohmann::json;

namespace {

constexpr std::size_t kDim = 24;

std::string error_code(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

// Mock chat that fails for one request kind.
class FailingKind : public ChatProvider {
public:
    explicit FailingKind(std::string kind) : kind_(std::move(kind)) {}
    std::string complete(const ChatRequest& r) override {
        if (r.kind == kind_) throw Error("provider_error", "scripted failure");
        return mock_.complete(r);
    }

private:
    std::string kind_;
    MockChatProvider mock_;
};

std::shared_ptr<Gateway> gateway_failing(const std::string& kind) {
    GatewayOptions o;
    o.embedding_dim = kDim;
    o.retry.max_attempts = 1;
    return std::make_shared<Gateway>(std::make_shared<FailingKind>(kind), std::make_shared<MockEmbeddingProvider>(kDim), o);
}

Engine make_engine(Task task, std::shared_ptr<Gateway> g = make_mock_gateway(kDim)) {
    EngineOptions o;
    o.clock = fake_clock();
    return Engine(load_task_profile(task, default_templates_dir()), std::move(g),
                  std::make_shared<EngineModel>(EngineModel::synthetic(3, kDim, 11)), o);
}

DialogueHistory esc_history() {
    DialogueHistory h(Task::esc);
    h.append(Speaker::user_role, "I can't sleep because of work stress.");
    h.append(Speaker::system_role, "I'm sorry. How long has this been going on?");
    h.append(Speaker::user_role, "About a month now.");
    return h;
}

}  // namespace

TEST_CASE("fake clock advances by its step") {
    auto c = fake_clock(2.5);
    CHECK(c() == 0.0);
    CHECK(c() == 2.5);
    CHECK(c() == 5.0);
}

TEST_CASE("synthetic engine model shapes") {
    auto m = EngineModel::synthetic(3, 10, 1, 4);
    CHECK(m.ranker.config.state_dim == 10);
    REQUIRE(m.progression.centroids.size() == 3);
    CHECK(m.progression.centroids[0].rows == 4);
    CHECK(m.progression.centroids[0].cols == 10);
}

TEST_CASE("turn invariants") {
    for (Task task : {Task::esc, Task::persuasion}) {
        auto engine = make_engine(task);
        DialogueHistory h = task == Task::esc ? esc_history() : DialogueHistory(Task::persuasion);
        if (task == Task::persuasion) {
            h.append(Speaker::system_role, "Hello! Have you heard of Save the Children?");
            h.append(Speaker::user_role, "No, what is it?");
        }
        const auto before = h.size();
        const auto trace = engine.run_turn(h);
        CHECK(h.size() == before);

        const int m = default_candidate_count(task);
        CHECK(trace.round == h.round());
        CHECK(trace.user_message == h.utterances().back().text);
        REQUIRE(trace.summaries.size() == 3);
        for (int a = 0; a < 3; ++a) {
            CHECK(trace.summaries[static_cast<std::size_t>(a)].aspect_id == a + 1);
            CHECK_FALSE(trace.summaries[static_cast<std::size_t>(a)].embedding);
        }
        CHECK(trace.candidates.size() <= static_cast<std::size_t>(3 * m));
        CHECK(trace.candidates.size() >= 3);
        for (std::size_t i = 0; i < trace.candidates.size(); ++i) {
            CHECK(trace.candidates[i].rank == static_cast<int>(i) + 1);
            REQUIRE(trace.candidates[i].score);
            if (i > 0) CHECK(*trace.candidates[i - 1].score <= *trace.candidates[i].score);
        }
        REQUIRE(trace.top_k.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) CHECK(trace.top_k[i].text == trace.candidates[i].text);
        CHECK(trace.prioritized_aspect == trace.top_k[0].aspect_id);
        CHECK_FALSE(trace.utterance.empty());
        // the mock generator echoes the first listed topic
        CHECK(trace.utterance.find(trace.top_k[0].text) != std::string::npos);
    }
}

TEST_CASE("stages run in order with reproducible timings") {
    auto engine = make_engine(Task::esc);
    const auto trace = engine.run_turn(esc_history());
    REQUIRE(trace.timings.size() == 4);
    const std::vector<std::string> order{"agents", "progression", "coordination", "generation"};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(trace.timings[i].stage == order[i]);
        CHECK(trace.timings[i].duration_ms == 1.0);
        if (i > 0) CHECK(trace.timings[i].start_ms >= trace.timings[i - 1].start_ms + trace.timings[i - 1].duration_ms);
    }
}

TEST_CASE("identical engines produce identical traces") {
    auto a = make_engine(Task::esc).run_turn(esc_history());
    auto b = make_engine(Task::esc).run_turn(esc_history());
    CHECK(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("trace JSON round trip") {
    const auto trace = make_engine(Task::esc).run_turn(esc_history());
    const auto doc = to_json(trace);
    CHECK(doc.contains("prioritized_aspect"));
    CHECK(doc["candidates"][0].contains("aspect_id"));
    CHECK(doc["summaries"][0].contains("text"));
    CHECK_FALSE(doc["summaries"][0].contains("embedding"));
    CHECK(to_json(turn_trace_from_json(doc)) == doc);
}

TEST_CASE("stage failures carry the stage name") {
    auto expect_stage = [](const std::string& kind, const std::string& stage, int aspect) {
        auto engine = make_engine(Task::esc, gateway_failing(kind));
        try {
            engine.run_turn(esc_history());
            FAIL("expected a failure");
        } catch (const Error& e) {
            CHECK(e.code() == "provider_error");
            CHECK(e.stage() == stage);
            CHECK(e.aspect_id() == aspect);
        }
    };
    expect_stage("esc/comforting/tracker", "agents", 2);
    expect_stage("esc/action/promoter", "agents", 3);
    expect_stage("esc/generate", "generation", 0);

    auto engine = make_engine(Task::esc);
    try {
        engine.run_turn(DialogueHistory{});
        FAIL("expected a failure");
    } catch (const Error& e) {
        CHECK(e.code() == "empty_history");
    }
}

TEST_CASE("engine construction checks the model against the profile and gateway") {
    auto profile = load_task_profile(Task::esc, default_templates_dir());
    CHECK(error_code([&] { Engine(profile, make_mock_gateway(kDim), nullptr); }) == "model_not_loaded");
    CHECK(error_code([&] {
              Engine(profile, make_mock_gateway(kDim), std::make_shared<EngineModel>(EngineModel::synthetic(2, kDim, 1)));
          }) == "version_mismatch");
    CHECK(error_code([&] {
              Engine(profile, make_mock_gateway(kDim + 1), std::make_shared<EngineModel>(EngineModel::synthetic(3, kDim, 1)));
          }) == "version_mismatch");
}

TEST_CASE("shipped golden traces parse and satisfy the invariants") {
    for (const char* name : {"turn_trace_esc.json", "turn_trace_persuasion.json"}) {
        std::ifstream in(std::string(DIALCOORD_GOLDEN_DIR) + "/" + name);
        REQUIRE(in);
        const auto trace = turn_trace_from_json(json::parse(in));
        CHECK(trace.summaries.size() == 3);
        CHECK(trace.top_k.size() == 3);
        CHECK(trace.prioritized_aspect == trace.top_k[0].aspect_id);
        CHECK(trace.candidates[0].rank == 1);
    }
}
