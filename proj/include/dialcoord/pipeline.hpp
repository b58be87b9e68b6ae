#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialcoord/agents.hpp"
#include "dialcoord/generation.hpp"
#include "dialcoord/ranker.hpp"
#include "dialcoord/task_profile.hpp"

namespace dialcoord {

struct StageTiming {
    std::string stage;  // "agents", "progression", "coordination", "generation"
    double start_ms = 0.0;
    double duration_ms = 0.0;
};

struct TurnTrace {
    int round = 0;
    std::string user_message;
    std::vector<StateSummary> summaries;     // one per aspect, by aspect id
    std::vector<TopicCandidate> candidates;  // every candidate, in rank order
    std::vector<TopicCandidate> top_k;
    int prioritized_aspect = 0;
    std::string utterance;
    std::vector<StageTiming> timings;
};

// snake_case wire document; embeddings are omitted.
nlohmann::json to_json(const TurnTrace& trace);
TurnTrace turn_trace_from_json(const nlohmann::json& doc);

// Trained ranker plus per-aspect centroid matrices (indexed by aspect id - 1).
struct EngineModel {
    RankerModel ranker;
    ProgressionContext progression;

    // Freshly initialized ranker with Gaussian-sampled centroids, for demos
    // and offline runs without trained artifacts.
    static EngineModel synthetic(std::size_t aspect_count, std::size_t state_dim, std::uint64_t seed,
                                 int centroids_per_aspect = 5);
};

// Milliseconds on an arbitrary monotonic origin.
using Clock = std::function<double()>;
Clock steady_clock_ms();
// Advances by step_ms on every call; makes timings reproducible.
Clock fake_clock(double step_ms = 1.0);

struct EngineOptions {
    AgentOptions agents;
    double generation_temperature = 0.7;
    Clock clock;  // defaults to steady_clock_ms()
};

// One system turn: agents -> progression -> coordination -> generation.
class Engine {
public:
    Engine(TaskProfile profile, std::shared_ptr<Gateway> gateway, std::shared_ptr<const EngineModel> model,
           EngineOptions options = {});

    // history must be non-empty. Does not modify history; the caller appends
    // trace.utterance as the system turn. Stage failures carry the stage name.
    TurnTrace run_turn(const DialogueHistory& history) const;

    const TaskProfile& profile() const noexcept { return profile_; }
    Gateway& gateway() const noexcept { return *gateway_; }

private:
    TaskProfile profile_;
    std::shared_ptr<Gateway> gateway_;
    std::shared_ptr<const EngineModel> model_;
    EngineOptions options_;
};

}  // namespace dialcoord
