#include "dialcoord/config.hpp"

#include <cstdlib>
#include <fstream>

#include "dialcoord/error.hpp"
#include "dialcoord/store.hpp"

namespace dialcoord {

using json = nlohmann::json;
namespace fs = std::filesystem;

fs::path default_templates_dir() {
    if (const char* env = std::getenv("DIALCOORD_TEMPLATES"); env && *env) return env;
#ifdef DIALCOORD_TEMPLATE_DIR
    return DIALCOORD_TEMPLATE_DIR;
#else
    return "templates";
#endif
}

int AppConfig::candidate_count(Task task) const {
    auto it = m.find(task);
    return it == m.end() ? default_candidate_count(task) : it->second;
}

AppConfig default_config() {
    AppConfig c;
    c.templates_dir = default_templates_dir();
    return c;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

AppConfig parse_config(const json& doc, const fs::path& base_dir) {
    AppConfig c = default_config();
    try {
        if (doc.contains("templates_dir")) c.templates_dir = resolve(base_dir, doc["templates_dir"].get<std::string>());
        if (doc.contains("provider")) {
            const auto& p = doc["provider"];
            c.provider_mode = p.value("mode", c.provider_mode);
            c.base_url = p.value("base_url", c.base_url);
            c.api_key = p.value("api_key", c.api_key);
            c.chat_path = p.value("chat_path", c.chat_path);
            c.embedding_path = p.value("embedding_path", c.embedding_path);
            c.chat_model = p.value("chat_model", c.chat_model);
            c.embedding_model = p.value("embedding_model", c.embedding_model);
            c.timeout_s = p.value("timeout_s", c.timeout_s);
            c.mock_seed = p.value("seed", c.mock_seed);
        }
        c.embedding_dim = doc.value("embedding_dim", c.embedding_dim);
        c.concurrency_cap = doc.value("concurrency_cap", c.concurrency_cap);
        c.top_k = doc.value("top_k", c.top_k);
        if (doc.contains("m")) {
            const auto& m = doc["m"];
            if (m.is_number_integer()) {
                c.m[Task::esc] = c.m[Task::persuasion] = m.get<int>();
            } else {
                for (const auto& [task, value] : m.items()) c.m[parse_task(task)] = value.get<int>();
            }
        }
        if (doc.contains("models")) {
            for (const auto& [task, entry] : doc["models"].items()) {
                ModelPaths paths;
                paths.checkpoint = resolve(base_dir, entry.at("checkpoint").get<std::string>());
                for (const auto& f : entry.at("centroids")) paths.centroids.push_back(resolve(base_dir, f.get<std::string>()));
                c.models[parse_task(task)] = std::move(paths);
            }
        }
        c.synthetic_model = doc.value("synthetic_model", c.synthetic_model);
        c.synthetic_seed = doc.value("synthetic_seed", c.synthetic_seed);
        if (doc.contains("event_log")) c.event_log = resolve(base_dir, doc["event_log"].get<std::string>());
    } catch (const json::exception& e) {
        throw Error("invalid_config", e.what());
    }
    if (c.provider_mode != "mock" && c.provider_mode != "http") {
        throw Error("invalid_config", "provider.mode must be \"mock\" or \"http\"");
    }
    if (c.top_k < 1) throw Error("invalid_config", "top_k must be at least 1");
    if (c.embedding_dim == 0) throw Error("invalid_config", "embedding_dim must be positive");
    return c;
}

AppConfig load_config(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("io_error", "cannot open config " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error("invalid_config", file.string() + ": " + e.what());
    }
    AppConfig c = parse_config(doc, file.parent_path());
    apply_environment(c);
    return c;
}

void apply_environment(AppConfig& config) {
    if (const char* key = std::getenv("DIALCOORD_API_KEY"); key && *key) config.api_key = key;
    if (const char* url = std::getenv("DIALCOORD_BASE_URL"); url && *url) config.base_url = url;
}

std::shared_ptr<Gateway> make_gateway(const AppConfig& config) {
    GatewayOptions options;
    options.embedding_dim = config.embedding_dim;
    options.concurrency_cap = config.concurrency_cap;
    if (config.provider_mode == "mock") {
        return std::make_shared<Gateway>(std::make_shared<MockChatProvider>(),
                                         std::make_shared<MockEmbeddingProvider>(config.embedding_dim, config.mock_seed),
                                         options);
    }
    if (config.base_url.empty()) throw Error("invalid_config", "http provider needs base_url (or DIALCOORD_BASE_URL)");
    HttpEndpoint chat{config.base_url, config.chat_path, config.chat_model, config.api_key, config.timeout_s};
    HttpEndpoint embed{config.base_url, config.embedding_path, config.embedding_model, config.api_key, config.timeout_s};
    return std::make_shared<Gateway>(std::make_shared<HttpChatProvider>(chat),
                                     std::make_shared<HttpEmbeddingProvider>(embed), options);
}

std::shared_ptr<const EngineModel> load_engine_model(const AppConfig& config, Task task) {
    const std::size_t n_t = aspect_names(task).size();
    auto it = config.models.find(task);
    if (it == config.models.end()) {
        if (config.synthetic_model) {
            return std::make_shared<EngineModel>(EngineModel::synthetic(n_t, config.embedding_dim, config.synthetic_seed));
        }
        throw Error("model_not_loaded", "no ranker configured for task " + std::string(to_string(task)));
    }
    const auto& paths = it->second;
    if (paths.centroids.size() != n_t) {
        throw Error("invalid_config", "expected " + std::to_string(n_t) + " centroid files for " +
                                          std::string(to_string(task)));
    }
    auto model = std::make_shared<EngineModel>();
    auto loaded = load_checkpoint(paths.checkpoint);
    if (loaded.model.config.aspect_count != n_t || loaded.model.config.state_dim != config.embedding_dim) {
        throw Error("version_mismatch", paths.checkpoint.string() + " does not match the configured task and embedding_dim");
    }
    model->ranker = std::move(loaded.model);
    for (std::size_t i = 0; i < n_t; ++i) {
        auto c = load_centroids(paths.centroids[i], config.embedding_dim);
        if (c.aspect_id != static_cast<int>(i + 1)) {
            throw Error("invalid_config", paths.centroids[i].string() + " holds aspect " + std::to_string(c.aspect_id));
        }
        model->progression.centroids.push_back(std::move(c.centroids));
    }
    return model;
}

}  // namespace dialcoord
