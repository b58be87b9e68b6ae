#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialcoord/gateway.hpp"
#include "dialcoord/pipeline.hpp"

namespace dialcoord {

struct ModelPaths {
    std::filesystem::path checkpoint;
    std::vector<std::filesystem::path> centroids;  // one per aspect, by aspect id
};

// Single JSON document, e.g.
// {
//   "templates_dir": "templates",
//   "provider": {"mode": "http", "base_url": "...", "api_key": "...",
//                "chat_model": "gpt-3.5-turbo", "embedding_model": "text-embedding-3-small"},
//   "embedding_dim": 768, "concurrency_cap": 4,
//   "m": {"esc": 4, "persuasion": 3}, "top_k": 3,
//   "models": {"esc": {"checkpoint": "...", "centroids": ["...", "...", "..."]}},
//   "event_log": "sessions.jsonl"
// }
// Relative paths resolve against the config file's directory.
// DIALCOORD_API_KEY and DIALCOORD_BASE_URL override the provider secrets.
struct AppConfig {
    std::filesystem::path templates_dir;
    std::string provider_mode = "mock";  // "mock" or "http"
    std::string base_url;
    std::string api_key;
    std::string chat_path = "/v1/chat/completions";
    std::string embedding_path = "/v1/embeddings";
    std::string chat_model = "gpt-3.5-turbo";
    std::string embedding_model = "text-embedding-3-small";
    double timeout_s = 60.0;
    std::uint64_t mock_seed = 0;
    std::size_t embedding_dim = kDefaultEmbeddingDim;
    std::size_t concurrency_cap = 4;
    std::map<Task, int> m;  // absent -> task default
    int top_k = kDefaultTopK;
    std::map<Task, ModelPaths> models;
    // Use a seeded untrained ranker and random centroids when no model is configured.
    bool synthetic_model = false;
    std::uint64_t synthetic_seed = 0;
    std::filesystem::path event_log;

    int candidate_count(Task task) const;
};

AppConfig default_config();
AppConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& file);
void apply_environment(AppConfig& config);

std::shared_ptr<Gateway> make_gateway(const AppConfig& config);

// Loads checkpoint and centroids for the task; "model_not_loaded" when neither
// a model nor synthetic_model is configured.
std::shared_ptr<const EngineModel> load_engine_model(const AppConfig& config, Task task);

// Directory holding templates; DIALCOORD_TEMPLATES overrides the build-time default.
std::filesystem::path default_templates_dir();

}  // namespace dialcoord
