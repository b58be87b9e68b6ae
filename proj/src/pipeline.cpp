#include "dialcoord/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <numbers>

#include "dialcoord/error.hpp"
#include "dialcoord/hash.hpp"
#include "dialcoord/progression.hpp"

namespace dialcoord {

using json = nlohmann::json;

namespace {

json candidate_json(const TopicCandidate& c) {
    json j = {{"aspect_id", c.aspect_id}, {"candidate_index", c.candidate_index}, {"text", c.text}};
    j["score"] = c.score ? json(*c.score) : json(nullptr);
    j["rank"] = c.rank ? json(*c.rank) : json(nullptr);
    return j;
}

TopicCandidate candidate_from_json(const json& j) {
    TopicCandidate c;
    c.aspect_id = j.at("aspect_id").get<int>();
    c.candidate_index = j.at("candidate_index").get<int>();
    c.text = j.at("text").get<std::string>();
    if (j.contains("score") && !j["score"].is_null()) c.score = j["score"].get<double>();
    if (j.contains("rank") && !j["rank"].is_null()) c.rank = j["rank"].get<int>();
    return c;
}

template <typename Fn>
auto run_stage(const char* stage, const Clock& clock, std::vector<StageTiming>& timings, Fn&& fn) {
    const double start = clock();
    auto finish = [&] { timings.push_back({stage, start, clock() - start}); };
    try {
        auto result = fn();
        finish();
        return result;
    } catch (Error& e) {
        if (e.stage().empty()) e.with_stage(stage);
        throw;
    } catch (const std::exception& e) {
        throw Error("internal_error", e.what()).with_stage(stage);
    }
}

}  // namespace

json to_json(const TurnTrace& t) {
    json summaries = json::array();
    for (const auto& s : t.summaries) summaries.push_back({{"aspect_id", s.aspect_id}, {"text", s.text}});
    json candidates = json::array();
    for (const auto& c : t.candidates) candidates.push_back(candidate_json(c));
    json top = json::array();
    for (const auto& c : t.top_k) top.push_back(candidate_json(c));
    json timings = json::array();
    for (const auto& s : t.timings) {
        timings.push_back({{"stage", s.stage}, {"start_ms", s.start_ms}, {"duration_ms", s.duration_ms}});
    }
    return {{"round", t.round},
            {"user_message", t.user_message},
            {"summaries", std::move(summaries)},
            {"candidates", std::move(candidates)},
            {"top_k", std::move(top)},
            {"prioritized_aspect", t.prioritized_aspect},
            {"utterance", t.utterance},
            {"timings", std::move(timings)}};
}

TurnTrace turn_trace_from_json(const json& j) {
    try {
        TurnTrace t;
        t.round = j.at("round").get<int>();
        t.user_message = j.value("user_message", "");
        for (const auto& s : j.at("summaries")) {
            t.summaries.push_back({s.at("aspect_id").get<int>(), s.at("text").get<std::string>(), std::nullopt});
        }
        for (const auto& c : j.at("candidates")) t.candidates.push_back(candidate_from_json(c));
        for (const auto& c : j.at("top_k")) t.top_k.push_back(candidate_from_json(c));
        t.prioritized_aspect = j.at("prioritized_aspect").get<int>();
        t.utterance = j.at("utterance").get<std::string>();
        for (const auto& s : j.at("timings")) {
            t.timings.push_back({s.at("stage").get<std::string>(), s.at("start_ms").get<double>(),
                                 s.at("duration_ms").get<double>()});
        }
        return t;
    } catch (const json::exception& e) {
        throw Error("schema_violation", std::string("turn trace: ") + e.what());
    }
}

EngineModel EngineModel::synthetic(std::size_t aspect_count, std::size_t state_dim, std::uint64_t seed,
                                   int centroids_per_aspect) {
    EngineModel m;
    RankerConfig config;
    config.aspect_count = aspect_count;
    config.state_dim = state_dim;
    config.seed = seed;
    m.ranker = RankerModel::initialize(config);
    std::uint64_t state = seed ^ 0x5eedc0ffeeULL;
    auto uniform = [&] { return (static_cast<double>(splitmix64(state) >> 11) + 0.5) * 0x1.0p-53; };
    for (std::size_t a = 0; a < aspect_count; ++a) {
        Matrix c(static_cast<std::size_t>(centroids_per_aspect), state_dim);
        for (auto& x : c.data) {
            x = std::sqrt(-2.0 * std::log(uniform())) * std::cos(2.0 * std::numbers::pi * uniform()) /
                std::sqrt(static_cast<double>(state_dim));
        }
        m.progression.centroids.push_back(std::move(c));
    }
    return m;
}

Clock steady_clock_ms() {
    const auto origin = std::chrono::steady_clock::now();
    return [origin] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - origin).count();
    };
}

Clock fake_clock(double step_ms) {
    auto now = std::make_shared<double>(0.0);
    return [now, step_ms] {
        const double t = *now;
        *now += step_ms;
        return t;
    };
}

Engine::Engine(TaskProfile profile, std::shared_ptr<Gateway> gateway, std::shared_ptr<const EngineModel> model,
               EngineOptions options)
    : profile_(std::move(profile)), gateway_(std::move(gateway)), model_(std::move(model)),
      options_(std::move(options)) {
    if (!model_) throw Error("model_not_loaded", "engine needs a ranker and centroids");
    validate_aspects(profile_.aspects);
    const auto& cfg = model_->ranker.config;
    if (cfg.aspect_count != profile_.aspect_count() || model_->progression.centroids.size() != cfg.aspect_count) {
        throw Error("version_mismatch", "model was built for " + std::to_string(cfg.aspect_count) + " aspects");
    }
    if (cfg.state_dim != gateway_->embedding_dim()) {
        throw Error("version_mismatch", "model n_d=" + std::to_string(cfg.state_dim) + " but embeddings have " +
                                            std::to_string(gateway_->embedding_dim()) + " dimensions");
    }
    if (!options_.clock) options_.clock = steady_clock_ms();
}

TurnTrace Engine::run_turn(const DialogueHistory& history) const {
    if (history.empty()) throw Error("empty_history", "a turn needs at least one utterance").with_stage("agents");
    const Clock& clock = options_.clock;
    TurnTrace trace;
    trace.round = history.round();
    for (auto it = history.utterances().rbegin(); it != history.utterances().rend(); ++it) {
        if (it->speaker == Speaker::user_role) {
            trace.user_message = it->text;
            break;
        }
    }

    AgentOptions agent_options = options_.agents;
    agent_options.embed_summaries = true;
    auto outputs = run_stage("agents", clock, trace.timings,
                             [&] { return run_all_agents(profile_.aspects, history, *gateway_, agent_options); });
    std::sort(outputs.begin(), outputs.end(), [](const auto& a, const auto& b) { return a.aspect_id < b.aspect_id; });

    const auto& model = *model_;
    auto signals = run_stage("progression", clock, trace.timings, [&] {
        std::vector<ProgressionSignal> out;
        for (const auto& o : outputs) {
            const auto idx = static_cast<std::size_t>(o.aspect_id - 1);
            const Vec& s = *o.summary.embedding;
            out.push_back(progression_signal(
                o.aspect_id, estimate_target(s, model.progression.centroids.at(idx), model.ranker.attention.at(idx)),
                s));
        }
        return out;
    });

    std::vector<TopicCandidate> candidates;
    for (const auto& o : outputs) {
        trace.summaries.push_back(o.summary);
        trace.summaries.back().embedding.reset();
        candidates.insert(candidates.end(), o.candidates.begin(), o.candidates.end());
    }
    auto ranking = run_stage("coordination", clock, trace.timings, [&] {
        return rank_candidates(history, std::move(candidates), signals, model.ranker, profile_.top_k, *gateway_,
                               profile_.labels);
    });
    trace.candidates = ranking.all;
    trace.top_k = ranking.top;
    trace.prioritized_aspect = prioritized_aspect(ranking.top);

    auto utterance = run_stage("generation", clock, trace.timings, [&] {
        GenerationInput input{history, ranking.top, trace.summaries};
        return generate_utterance(profile_, input, *gateway_, options_.generation_temperature);
    });
    trace.utterance = utterance.text;
    return trace;
}

}  // namespace dialcoord
