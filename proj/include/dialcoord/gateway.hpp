#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dialcoord/linalg.hpp"

namespace dialcoord {

inline constexpr std::size_t kDefaultEmbeddingDim = 768;

struct ChatRequest {
    std::string prompt;
    double temperature = 0.7;
    int max_tokens = 256;
    std::vector<std::string> stop_sequences;
    // Template id ("esc/exploration/tracker", "esc/generate", ...). Only the
    // mock provider looks at it.
    std::string kind;
};

struct EmbeddingVector {
    Vec values;

    std::size_t dim() const noexcept { return values.size(); }
};

// Inner product, no normalization.
double similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Providers throw dialcoord::Error. "provider_timeout" and
// "provider_rate_limited" are transient and retried by the Gateway.
class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual Vec embed(std::string_view text) = 0;
};

// Canned-response chat provider. Responses are a pure function of
// (kind, prompt), so repeated calls are bitwise identical.
class MockChatProvider : public ChatProvider {
public:
    using Table = std::map<std::string, std::vector<std::string>>;

    MockChatProvider();
    explicit MockChatProvider(Table table);

    std::string complete(const ChatRequest& request) override;

    static Table default_table();

private:
    const std::vector<std::string>* lookup(const std::string& kind) const;
    Table table_;
};

// Deterministic pseudo-random unit vectors seeded by hash(text).
class MockEmbeddingProvider : public EmbeddingProvider {
public:
    explicit MockEmbeddingProvider(std::size_t dim = kDefaultEmbeddingDim, std::uint64_t seed = 0);
    Vec embed(std::string_view text) override;

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

struct HttpEndpoint {
    std::string base_url;  // e.g. "https://api.openai.com"
    std::string path;      // e.g. "/v1/chat/completions"
    std::string model;
    std::string api_key;
    double timeout_s = 60.0;
};

// POST {model, messages:[{role, content}], temperature, max_tokens[, stop]}
// -> {choices:[{message:{content}}]}
class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(HttpEndpoint endpoint);
    std::string complete(const ChatRequest& request) override;

private:
    HttpEndpoint endpoint_;
};

// POST {model, input} -> {data:[{embedding:[...]}]}
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(HttpEndpoint endpoint);
    Vec embed(std::string_view text) override;

private:
    HttpEndpoint endpoint_;
};

struct RetryPolicy {
    int max_attempts = 3;
    double initial_backoff_s = 0.5;
    double backoff_multiplier = 2.0;
    // Replaced in tests to avoid real sleeping.
    std::function<void(double seconds)> sleep;
};

// Caps the number of in-flight provider calls.
class ConcurrencyLimiter {
public:
    explicit ConcurrencyLimiter(std::size_t cap);

    class Permit {
    public:
        explicit Permit(ConcurrencyLimiter& limiter);
        ~Permit();
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;

    private:
        ConcurrencyLimiter& limiter_;
    };

    std::size_t in_flight() const;
    std::size_t peak() const;

private:
    void acquire();
    void release();

    std::size_t cap_;
    std::size_t in_flight_ = 0;
    std::size_t peak_ = 0;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
};

struct GatewayOptions {
    std::size_t embedding_dim = kDefaultEmbeddingDim;
    RetryPolicy retry;
    std::size_t concurrency_cap = 4;
    bool cache_embeddings = true;
};

// Shareable handle: retries transient failures, validates responses and
// serializes calls beyond the concurrency cap.
class Gateway {
public:
    Gateway(std::shared_ptr<ChatProvider> chat, std::shared_ptr<EmbeddingProvider> embedder,
            GatewayOptions options = {});

    std::string chat_complete(const ChatRequest& request);
    EmbeddingVector embed_text(std::string_view text);

    std::size_t embedding_dim() const noexcept { return options_.embedding_dim; }
    const ConcurrencyLimiter& limiter() const noexcept { return limiter_; }

private:
    template <typename Fn>
    auto with_retries(Fn&& fn) -> decltype(fn());

    std::shared_ptr<ChatProvider> chat_;
    std::shared_ptr<EmbeddingProvider> embedder_;
    GatewayOptions options_;
    ConcurrencyLimiter limiter_;
    std::mutex cache_mutex_;
    std::unordered_map<std::string, Vec> cache_;
};

// Fully offline gateway: mock chat + mock embeddings of the given dimension.
std::shared_ptr<Gateway> make_mock_gateway(std::size_t embedding_dim = kDefaultEmbeddingDim, std::uint64_t seed = 0);

}  // namespace dialcoord
