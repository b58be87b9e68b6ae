#include "dialcoord/gateway.hpp"

#include <httplib.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <thread>

#include "dialcoord/core.hpp"
#include "dialcoord/error.hpp"
#include "dialcoord/hash.hpp"

namespace dialcoord {

using json = nlohmann::json;

double similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw Error("dimension_mismatch",
                    "similarity of " + std::to_string(a.dim()) + "- and " + std::to_string(b.dim()) + "-dim vectors");
    }
    return dot(a.values, b.values);
}

// ---------------------------------------------------------------- mock chat

MockChatProvider::MockChatProvider() : MockChatProvider(default_table()) {}

MockChatProvider::MockChatProvider(Table table) : table_(std::move(table)) {}

MockChatProvider::Table MockChatProvider::default_table() {
    Table t;
    t["esc/exploration/tracker"] = {
        "The seeker feels overwhelmed by pressure at work and worries about losing their job.",
        "The seeker is lonely after moving to a new city and struggles to make friends.",
        "The seeker is stressed about exams and feels they are disappointing their parents.",
        "The seeker recently broke up with their partner and cannot stop thinking about it.",
    };
    t["esc/comforting/tracker"] = {
        "The supporter reflects the seeker's feelings and reassures them that their stress is understandable.",
        "The supporter shares a similar experience and affirms the seeker's efforts.",
        "The supporter paraphrases the seeker's concerns and validates their emotions.",
    };
    t["esc/action/tracker"] = {
        "The supporter suggested writing down worries and talking with a trusted friend.",
        "The supporter recommended a regular sleep schedule and short daily walks.",
        "The supporter proposed speaking with a counselor about the situation.",
    };
    t["esc/exploration/promoter"] = {
        "How long have you been feeling this way?",
        "What do you think triggered these feelings recently?",
        "Have you talked to anyone else about this?",
        "How is this affecting your sleep and daily routine?",
        "What would a good outcome look like for you?",
        "Is there someone at work you feel comfortable with?",
        "How are things with your family at the moment?",
        "What have you tried so far to cope with it?",
    };
    t["esc/comforting/promoter"] = {
        "It sounds like you are carrying a lot right now. (strategy: reflection of feelings)",
        "I went through something similar and it felt very heavy. (strategy: self-disclosure)",
        "You are doing your best, and that matters. (strategy: affirmation and reassurance)",
        "So you feel stuck between what others expect and what you need. (strategy: restatement or paraphrasing)",
        "Feeling anxious in this situation is completely understandable. (strategy: reflection of feelings)",
        "Reaching out like this shows real strength. (strategy: affirmation and reassurance)",
    };
    t["esc/action/promoter"] = {
        "Try writing down your worries each evening.",
        "Consider talking with a counselor or therapist.",
        "Take a short walk outside every day.",
        "Break the big task into smaller steps.",
        "Reach out to one friend this week.",
        "Keep a regular sleep schedule.",
        "Set aside time for a hobby you enjoy.",
    };
    t["persuasion/attention/tracker"] = {
        "The persuader asked whether the persuadee has donated before and learned they care about children.",
        "The persuader greeted the persuadee and asked about their familiarity with charities.",
    };
    t["persuasion/appeal/tracker"] = {
        "The persuader described how donations fund education and health care for children.",
        "The persuader shared a personal story about donating to Save the Children.",
    };
    t["persuasion/proposition/tracker"] = {
        "The persuader has not directly asked for a donation yet.",
        "The persuader proposed a small donation and the persuadee is considering it.",
    };
    t["persuasion/attention/promoter"] = {
        "Have you ever donated to a charity before?",
        "Do you have children or work with kids?",
        "What causes matter most to you?",
        "Have you heard of Save the Children?",
        "How do you usually decide which charity to support?",
    };
    t["persuasion/appeal/promoter"] = {
        "Save the Children has helped millions of kids for over a century. (credibility appeal)",
        "Even two dollars can provide clean water for a child. (donation information)",
        "I am donating part of my earnings today myself. (self-modeling)",
        "Imagine a child going to bed hungry tonight. (emotion appeal)",
        "A small gift now can grow into lasting change. (logical appeal)",
        "My friend sponsored a child and received letters for years. (personal story)",
    };
    t["persuasion/proposition/promoter"] = {
        "Would you consider donating part of your payment today?",
        "How much would you feel comfortable giving?",
        "Could you start with just one dollar?",
        "Would you like to match my donation?",
    };
    t["generate"] = {
        "I hear you.",
        "Thank you for sharing that with me.",
        "That sounds really hard.",
        "I appreciate you opening up.",
        "Let's think about this together.",
        "That makes a lot of sense.",
    };
    t["esc/seeker"] = {
        "I have been feeling really down lately.",
        "My boss keeps piling work on me and I can't keep up.",
        "I haven't told anyone about this yet.",
        "Honestly I don't sleep well anymore.",
        "I guess I am afraid of failing again.",
        "My parents expect so much from me.",
        "Maybe I could try talking to a friend.",
        "It started about two months ago.",
        "I feel a little better talking about it.",
        "Work used to be fun, now it drains me.",
        "I don't know where to start fixing this.",
        "Some days I just want to stay in bed.",
    };
    t["baseline_gpt35"] = {
        "I'm sorry you're going through this. Have you considered talking to someone you trust?",
        "That sounds difficult. Remember to take care of yourself and rest when you can.",
        "It's completely normal to feel this way. Maybe try some relaxation techniques.",
    };
    t["baseline_cot"] = {
        "[start]\n[Progression Analysis] Exploration is partial; comforting has started; no action yet.\n"
        "[Determine Aspect] Comforting\n[Response] That sounds exhausting, and it makes sense you feel this way.\n[end]",
        "[start]\n[Progression Analysis] The problem is clear; some comfort given.\n[Determine Aspect] Action\n"
        "[Response] Would it help to plan one small step for tomorrow?\n[end]",
    };
    t["baseline_mixinit"] = {
        "Therapist: [Strategy: Question] How long have you felt this way?",
        "Therapist: [Strategy: Reflection of feelings] It sounds like you feel very alone.",
        "Therapist: [Strategy: Providing Suggestions] Maybe a short walk could help clear your mind.",
    };
    return t;
}

const std::vector<std::string>* MockChatProvider::lookup(const std::string& kind) const {
    if (auto it = table_.find(kind); it != table_.end()) return &it->second;
    // "esc/baseline_gpt35" -> "baseline_gpt35", "esc/generate" -> "generate"
    auto slash = kind.rfind('/');
    if (slash != std::string::npos) {
        if (auto it = table_.find(kind.substr(slash + 1)); it != table_.end()) return &it->second;
    }
    return nullptr;
}

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool has_line_starting_with(std::string_view text, std::string_view prefix) {
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        auto line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        if (line.substr(0, prefix.size()) == prefix) return true;
        if (end == std::string_view::npos) break;
        pos = end + 1;
    }
    return false;
}

// First item of the "[Topic Candidates]" block, if any.
std::string first_topic_candidate(std::string_view prompt) {
    auto pos = prompt.find("[Topic Candidates]\n");
    if (pos == std::string_view::npos) return {};
    pos += std::string_view("[Topic Candidates]\n").size();
    auto end = prompt.find('\n', pos);
    std::string line(prompt.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    auto dot = line.find(". ");
    if (dot != std::string::npos && dot < 4) line = line.substr(dot + 2);
    return trim(line);
}

}  // namespace

std::string MockChatProvider::complete(const ChatRequest& request) {
    const auto* variants = lookup(request.kind);
    if (variants == nullptr || variants->empty()) {
        throw Error("malformed_response", "mock provider has no canned response for kind '" + request.kind + "'");
    }
    std::uint64_t state = fnv1a64(request.prompt);
    const std::uint64_t h = splitmix64(state);
    const auto& v = *variants;

    if (ends_with(request.kind, "action/tracker") && !has_line_starting_with(request.prompt, "Supporter:")) {
        return "No suggestions have been given yet.";
    }
    if (ends_with(request.kind, "/promoter")) {
        // Four distinct items, numbered.
        const std::size_t n = v.size();
        const std::size_t count = std::min<std::size_t>(4, n);
        std::size_t start = h % n;
        std::size_t stride = 1 + (h >> 32) % (n - 1 == 0 ? 1 : n - 1);
        while (std::gcd(stride, n) != 1) ++stride;
        std::string out;
        for (std::size_t i = 0; i < count; ++i) {
            out += std::to_string(i + 1) + ". " + v[(start + i * stride) % n] + "\n";
        }
        return out;
    }
    if (ends_with(request.kind, "/generate")) {
        std::string label = request.kind.rfind("persuasion/", 0) == 0 ? "Persuader" : "Supporter";
        std::string topic = first_topic_candidate(request.prompt);
        std::string text = v[h % v.size()];
        if (!topic.empty()) text += " " + topic;
        return label + ": " + text;
    }
    if (ends_with(request.kind, "/seeker")) {
        return "Seeker: " + v[h % v.size()];
    }
    return v[h % v.size()];
}

// ---------------------------------------------------------------- mock embeddings

MockEmbeddingProvider::MockEmbeddingProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

Vec MockEmbeddingProvider::embed(std::string_view text) {
    std::uint64_t state = fnv1a64(text) ^ (seed_ * 0x9e3779b97f4a7c15ULL);
    auto uniform = [&state] {
        // (0, 1], never 0 so log() is finite
        return (static_cast<double>(splitmix64(state) >> 11) + 1.0) * 0x1.0p-53;
    };
    Vec v(dim_);
    for (std::size_t i = 0; i < dim_; i += 2) {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        v[i] = r * std::cos(theta);
        if (i + 1 < dim_) v[i + 1] = r * std::sin(theta);
    }
    const double n = norm(v);
    for (auto& x : v) x /= n;
    return v;
}

// ---------------------------------------------------------------- HTTP

namespace {

json post_json(const HttpEndpoint& ep, const json& body) {
    httplib::Client client(ep.base_url);
    const auto secs = static_cast<time_t>(ep.timeout_s);
    const auto usecs = static_cast<time_t>((ep.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!ep.api_key.empty()) headers.emplace("Authorization", "Bearer " + ep.api_key);

    auto res = client.Post(ep.path, headers, body.dump(), "application/json");
    if (!res) {
        throw Error("provider_timeout", "request to " + ep.base_url + ep.path + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 429) throw Error("provider_rate_limited", "HTTP 429 from " + ep.base_url);
    if (res->status >= 500) throw Error("provider_timeout", "HTTP " + std::to_string(res->status) + " from " + ep.base_url);
    if (res->status >= 400) {
        throw Error("provider_error", "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    if (trim(res->body).empty()) throw Error("malformed_response", "empty response body");
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw Error("malformed_response", e.what());
    }
}

}  // namespace

HttpChatProvider::HttpChatProvider(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    if (endpoint_.path.empty()) endpoint_.path = "/v1/chat/completions";
}

std::string HttpChatProvider::complete(const ChatRequest& request) {
    json body = {
        {"model", endpoint_.model},
        {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;
    const json reply = post_json(endpoint_, body);
    try {
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        auto text = content.get<std::string>();
        if (trim(text).empty()) throw Error("malformed_response", "empty completion");
        return text;
    } catch (const json::exception& e) {
        throw Error("malformed_response", e.what());
    }
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    if (endpoint_.path.empty()) endpoint_.path = "/v1/embeddings";
}

Vec HttpEmbeddingProvider::embed(std::string_view text) {
    const json reply = post_json(endpoint_, {{"model", endpoint_.model}, {"input", std::string(text)}});
    try {
        return reply.at("data").at(0).at("embedding").get<Vec>();
    } catch (const json::exception& e) {
        throw Error("malformed_response", e.what());
    }
}

// ---------------------------------------------------------------- limiter

ConcurrencyLimiter::ConcurrencyLimiter(std::size_t cap) : cap_(cap == 0 ? 1 : cap) {}

void ConcurrencyLimiter::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return in_flight_ < cap_; });
    ++in_flight_;
    peak_ = std::max(peak_, in_flight_);
}

void ConcurrencyLimiter::release() {
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
    cv_.notify_one();
}

std::size_t ConcurrencyLimiter::in_flight() const {
    std::lock_guard lock(mutex_);
    return in_flight_;
}

std::size_t ConcurrencyLimiter::peak() const {
    std::lock_guard lock(mutex_);
    return peak_;
}

ConcurrencyLimiter::Permit::Permit(ConcurrencyLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
ConcurrencyLimiter::Permit::~Permit() { limiter_.release(); }

// ---------------------------------------------------------------- gateway

Gateway::Gateway(std::shared_ptr<ChatProvider> chat, std::shared_ptr<EmbeddingProvider> embedder,
                 GatewayOptions options)
    : chat_(std::move(chat)),
      embedder_(std::move(embedder)),
      options_(std::move(options)),
      limiter_(options_.concurrency_cap) {
    if (!options_.retry.sleep) {
        options_.retry.sleep = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
    }
}

template <typename Fn>
auto Gateway::with_retries(Fn&& fn) -> decltype(fn()) {
    double backoff = options_.retry.initial_backoff_s;
    const int attempts = std::max(1, options_.retry.max_attempts);
    for (int attempt = 1;; ++attempt) {
        try {
            ConcurrencyLimiter::Permit permit(limiter_);
            return fn();
        } catch (const Error& e) {
            const bool transient = e.code() == "provider_timeout" || e.code() == "provider_rate_limited";
            if (!transient || attempt >= attempts) throw;
        }
        options_.retry.sleep(backoff);
        backoff *= options_.retry.backoff_multiplier;
    }
}

std::string Gateway::chat_complete(const ChatRequest& request) {
    if (!chat_) throw Error("provider_not_configured", "no chat provider");
    if (trim(request.prompt).empty()) throw Error("invalid_request", "prompt is empty");
    std::string text = with_retries([&] { return chat_->complete(request); });
    if (trim(text).empty()) throw Error("malformed_response", "empty completion");
    return text;
}

EmbeddingVector Gateway::embed_text(std::string_view text) {
    if (!embedder_) throw Error("provider_not_configured", "no embedding provider");
    if (trim(text).empty()) throw Error("invalid_request", "cannot embed empty text");
    if (options_.cache_embeddings) {
        std::lock_guard lock(cache_mutex_);
        if (auto it = cache_.find(std::string(text)); it != cache_.end()) return {it->second};
    }
    Vec values = with_retries([&] { return embedder_->embed(text); });
    if (values.size() != options_.embedding_dim) {
        throw Error("dimension_mismatch", "provider returned " + std::to_string(values.size()) +
                                              " values, expected " + std::to_string(options_.embedding_dim));
    }
    if (!all_finite(values)) throw Error("malformed_response", "embedding contains non-finite values");
    if (options_.cache_embeddings) {
        std::lock_guard lock(cache_mutex_);
        cache_.emplace(std::string(text), values);
    }
    return {std::move(values)};
}

std::shared_ptr<Gateway> make_mock_gateway(std::size_t embedding_dim, std::uint64_t seed) {
    GatewayOptions options;
    options.embedding_dim = embedding_dim;
    return std::make_shared<Gateway>(std::make_shared<MockChatProvider>(),
                                     std::make_shared<MockEmbeddingProvider>(embedding_dim, seed), options);
}

}  // namespace dialcoord
