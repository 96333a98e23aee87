#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "acrlab/errors.hpp"
#include "acrlab/util.hpp"

namespace acrlab {

using json = nlohmann::json;

// Routing key for scripted (mock) completions. One fixture can script
// reviews, seed generation, and refinement independently for the same target.
struct RoutingKey {
    std::string campaign;
    std::string target;
    std::string purpose;

    std::string str() const { return campaign + "|" + target + "|" + purpose; }
};

struct ChatMessage {
    std::string role; // "system", "user", "assistant"
    std::string text;
};

struct TokenUsage {
    long long input_tokens = 0;
    long long output_tokens = 0;
};

enum class BackendKind { live, mock };

struct ChatResult {
    std::string text;
    long long input_tokens = 0;
    long long output_tokens = 0;
    std::chrono::milliseconds provider_latency{0};
    BackendKind backend_kind = BackendKind::mock;

    TokenUsage usage() const { return {input_tokens, output_tokens}; }
};

enum class WireFormat { anthropic, openai };

struct ProviderProfile {
    std::string model_id;
    double input_usd_per_mtok = 0.0;
    double output_usd_per_mtok = 0.0;
    int rate_limit_per_min = 60;
    WireFormat wire = WireFormat::anthropic;
    std::string api_base;
    std::string auth_env; // name of the environment variable holding the key
};

struct ChatJob {
    std::string job_id;
    std::string model_id;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_output_tokens = 4096;
    std::string tool_policy_ref;
    RoutingKey routing;
};

inline double estimate_cost(const TokenUsage& usage, const ProviderProfile& profile) {
    if (usage.input_tokens < 0 || usage.output_tokens < 0)
        fail(Errc::domain_error, "estimate_cost: negative token count");
    return static_cast<double>(usage.input_tokens) / 1e6 * profile.input_usd_per_mtok +
           static_cast<double>(usage.output_tokens) / 1e6 * profile.output_usd_per_mtok;
}

struct LedgerEntry {
    std::string job_id;
    TokenUsage usage;
    double usd = 0.0;
    std::string timestamp;
};

// Append-only cost ledger. Optionally mirrors every entry to a JSONL file
// (one line: job_id, tokens, usd, timestamp).
class CostLedger {
public:
    CostLedger() = default;
    explicit CostLedger(fs::path persist_path) : persist_path_(std::move(persist_path)) {}

    void append(LedgerEntry entry) {
        std::lock_guard<std::mutex> lock(mutex_);
        total_usd_ += entry.usd;
        if (!persist_path_.empty()) {
            json line = {{"job_id", entry.job_id},
                         {"input_tokens", entry.usage.input_tokens},
                         {"output_tokens", entry.usage.output_tokens},
                         {"usd", entry.usd},
                         {"timestamp", entry.timestamp}};
            append_line(persist_path_, line.dump());
        }
        entries_.push_back(std::move(entry));
    }

    double total_usd() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return total_usd_;
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return entries_.size();
    }

    std::vector<LedgerEntry> entries() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return entries_;
    }

private:
    mutable std::mutex mutex_;
    std::vector<LedgerEntry> entries_;
    double total_usd_ = 0.0;
    fs::path persist_path_;
};

struct ScriptedResponse {
    std::string text;
    std::optional<long long> input_tokens;
    std::optional<long long> output_tokens;
};

// Deterministic scripted backend. Responses are consumed FIFO per routing
// key; a "*" key acts as a fallback queue for demo configs. A queue created
// with cycle=true rewinds instead of exhausting.
class MockBackend {
public:
    void script(const std::string& key, std::vector<ScriptedResponse> responses,
                bool cycle = false) {
        if (key.empty()) fail(Errc::config_error, "script_mock: empty routing key");
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = queues_.find(key);
        if (it != queues_.end() && it->second.next < it->second.responses.size())
            fail(Errc::duplicate_script, "unconsumed script queue for key: " + key);
        queues_[key] = Queue{std::move(responses), 0, cycle};
    }

    ChatResult complete(const ChatJob& job) {
        std::lock_guard<std::mutex> lock(mutex_);
        ++calls_;
        Queue* q = find_queue(job.routing.str());
        if (!q) q = find_queue("*");
        if (!q)
            fail(Errc::script_exhausted,
                 "no script queue for routing key: " + job.routing.str());
        if (q->next >= q->responses.size()) {
            if (q->cycle && !q->responses.empty())
                q->next = 0;
            else
                fail(Errc::script_exhausted,
                     "script queue exhausted for routing key: " + job.routing.str());
        }
        const ScriptedResponse& r = q->responses[q->next++];

        ChatResult result;
        result.text = r.text;
        result.backend_kind = BackendKind::mock;
        result.provider_latency = std::chrono::milliseconds(0);
        long long prompt_chars = 0;
        for (const auto& m : job.messages) prompt_chars += static_cast<long long>(m.text.size());
        result.input_tokens = r.input_tokens ? *r.input_tokens : (prompt_chars + 3) / 4;
        result.output_tokens =
            r.output_tokens ? *r.output_tokens : (static_cast<long long>(r.text.size()) + 3) / 4;
        return result;
    }

    std::size_t calls() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return calls_;
    }

private:
    struct Queue {
        std::vector<ScriptedResponse> responses;
        std::size_t next = 0;
        bool cycle = false;
    };

    Queue* find_queue(const std::string& key) {
        auto it = queues_.find(key);
        return it == queues_.end() ? nullptr : &it->second;
    }

    mutable std::mutex mutex_;
    std::map<std::string, Queue> queues_;
    std::size_t calls_ = 0;
};

// Sliding 60-second window limiter. Clock and sleeper are injectable so the
// window property is testable on virtual time.
class SlidingWindowLimiter {
public:
    using TimePoint = std::chrono::steady_clock::time_point;
    using Clock = std::function<TimePoint()>;
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit SlidingWindowLimiter(int limit_per_min, Clock clock = default_clock,
                                  Sleeper sleeper = default_sleeper)
        : limit_(limit_per_min), clock_(std::move(clock)), sleeper_(std::move(sleeper)) {
        if (limit_ < 1) fail(Errc::config_error, "rate limit must be >= 1");
    }

    void acquire() {
        constexpr auto window = std::chrono::seconds(60);
        std::unique_lock<std::mutex> lock(mutex_);
        for (;;) {
            const TimePoint now = clock_();
            while (!stamps_.empty() && now - stamps_.front() >= window) stamps_.pop_front();
            if (static_cast<int>(stamps_.size()) < limit_) {
                stamps_.push_back(now);
                return;
            }
            const auto wait =
                std::chrono::duration_cast<std::chrono::milliseconds>(stamps_.front() + window - now);
            lock.unlock();
            sleeper_(std::max(wait, std::chrono::milliseconds(1)));
            lock.lock();
        }
    }

private:
    static TimePoint default_clock() { return std::chrono::steady_clock::now(); }
    static void default_sleeper(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

    int limit_;
    Clock clock_;
    Sleeper sleeper_;
    std::mutex mutex_;
    std::deque<TimePoint> stamps_;
};

struct TransportReply {
    int status = 0; // 0 = transport-level failure
    std::string body;
    std::string error;
};

using Transport = std::function<TransportReply(const ChatJob&, const ProviderProfile&)>;

// Live provider client over an injectable transport. Retriable failures
// (transport error, HTTP 5xx) get 3 attempts with exponential backoff; 429
// surfaces as RateLimited for the caller to back off.
class LiveBackend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit LiveBackend(Transport transport, Sleeper sleeper = default_sleeper,
                         int max_attempts = 3)
        : transport_(std::move(transport)), sleeper_(std::move(sleeper)),
          max_attempts_(max_attempts) {}

    ChatResult complete(const ChatJob& job, const ProviderProfile& profile,
                        SlidingWindowLimiter& limiter) {
        std::string last_error;
        for (int attempt = 1; attempt <= max_attempts_; ++attempt) {
            limiter.acquire();
            const auto start = std::chrono::steady_clock::now();
            const TransportReply reply = transport_(job, profile);
            const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start);
            if (reply.status == 429)
                fail(Errc::rate_limited, "provider returned 429 for " + job.model_id);
            if (reply.status >= 200 && reply.status < 300) return parse_reply(reply, profile, latency);
            last_error = reply.error.empty() ? "HTTP " + std::to_string(reply.status) : reply.error;
            const bool retriable = reply.status == 0 || reply.status >= 500;
            if (!retriable) break;
            if (attempt < max_attempts_)
                sleeper_(std::chrono::milliseconds(250 << (attempt - 1)));
        }
        fail(Errc::provider_error, "provider call failed: " + last_error);
    }

private:
    static void default_sleeper(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

    static ChatResult parse_reply(const TransportReply& reply, const ProviderProfile& profile,
                                  std::chrono::milliseconds latency) {
        ChatResult result;
        result.backend_kind = BackendKind::live;
        result.provider_latency = latency;
        json body;
        try {
            body = json::parse(reply.body);
        } catch (const json::exception& e) {
            fail(Errc::provider_error, std::string("unparseable provider response: ") + e.what());
        }
        try {
            if (profile.wire == WireFormat::anthropic) {
                for (const auto& block : body.at("content"))
                    if (block.value("type", "text") == "text")
                        result.text += block.value("text", "");
                result.input_tokens = body.at("usage").value("input_tokens", 0LL);
                result.output_tokens = body.at("usage").value("output_tokens", 0LL);
            } else {
                result.text = body.at("choices").at(0).at("message").value("content", "");
                result.input_tokens = body.at("usage").value("prompt_tokens", 0LL);
                result.output_tokens = body.at("usage").value("completion_tokens", 0LL);
            }
        } catch (const json::exception& e) {
            fail(Errc::provider_error, std::string("unexpected provider response shape: ") + e.what());
        }
        if (result.text.empty()) fail(Errc::provider_error, "provider returned empty completion");
        return result;
    }

    Transport transport_;
    Sleeper sleeper_;
    int max_attempts_;
};

// Uniform chat-completion front end. Routes to the mock or live backend,
// accounts every completed job in the cost ledger atomically with the result.
class Gateway {
public:
    explicit Gateway(BackendKind kind, fs::path ledger_path = {})
        : kind_(kind), ledger_(std::move(ledger_path)) {}

    void register_profile(ProviderProfile profile) {
        if (profile.model_id.empty()) fail(Errc::config_error, "profile without model_id");
        if (profile.input_usd_per_mtok < 0 || profile.output_usd_per_mtok < 0)
            fail(Errc::config_error, "negative price in profile " + profile.model_id);
        if (profile.rate_limit_per_min < 1)
            fail(Errc::config_error, "rate limit must be >= 1 in profile " + profile.model_id);
        std::lock_guard<std::mutex> lock(mutex_);
        profiles_[profile.model_id] = std::move(profile);
    }

    bool has_profile(const std::string& model_id) const {
        std::lock_guard<std::mutex> lock(mutex_);
        return profiles_.count(model_id) > 0;
    }

    const ProviderProfile& profile(const std::string& model_id) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = profiles_.find(model_id);
        if (it == profiles_.end())
            fail(Errc::config_error, "no registered profile for model: " + model_id);
        return it->second;
    }

    void set_live_backend(std::unique_ptr<LiveBackend> backend) { live_ = std::move(backend); }

    void script_mock(const std::string& routing_key, std::vector<ScriptedResponse> responses,
                     bool cycle = false) {
        mock_.script(routing_key, std::move(responses), cycle);
    }

    void script_mock(const RoutingKey& key, std::vector<ScriptedResponse> responses,
                     bool cycle = false) {
        script_mock(key.str(), std::move(responses), cycle);
    }

    BackendKind kind() const { return kind_; }

    ChatResult complete(const ChatJob& job) {
        validate(job);
        const ProviderProfile prof = profile(job.model_id);
        ChatResult result;
        if (kind_ == BackendKind::mock) {
            result = mock_.complete(job);
        } else {
            if (!live_) fail(Errc::config_error, "live backend not configured");
            {
                std::lock_guard<std::mutex> lock(mutex_);
                ++live_dispatches_;
                if (!limiters_.count(job.model_id))
                    limiters_.emplace(job.model_id,
                                      std::make_unique<SlidingWindowLimiter>(prof.rate_limit_per_min));
            }
            result = live_->complete(job, prof, *limiters_.at(job.model_id));
        }
        LedgerEntry entry;
        entry.job_id = job.job_id.empty() ? "job-" + std::to_string(next_job_seq_++) : job.job_id;
        entry.usage = result.usage();
        entry.usd = estimate_cost(entry.usage, prof);
        entry.timestamp = iso_timestamp_now();
        ledger_.append(std::move(entry));
        return result;
    }

    const CostLedger& ledger() const { return ledger_; }
    std::size_t mock_calls() const { return mock_.calls(); }
    std::size_t live_dispatches() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return live_dispatches_;
    }

private:
    void validate(const ChatJob& job) const {
        if (job.messages.empty()) fail(Errc::config_error, "ChatJob with no messages");
        const std::string& first = job.messages.front().role;
        if (first != "system" && first != "user")
            fail(Errc::config_error, "first message role must be system or user, got: " + first);
        if (job.temperature < 0) fail(Errc::config_error, "negative temperature");
        if (job.max_output_tokens <= 0) fail(Errc::config_error, "max_output_tokens must be > 0");
        if (!has_profile(job.model_id))
            fail(Errc::config_error, "no registered profile for model: " + job.model_id);
    }

    BackendKind kind_;
    mutable std::mutex mutex_;
    std::map<std::string, ProviderProfile> profiles_;
    std::map<std::string, std::unique_ptr<SlidingWindowLimiter>> limiters_;
    MockBackend mock_;
    std::unique_ptr<LiveBackend> live_;
    CostLedger ledger_;
    std::size_t live_dispatches_ = 0;
    std::atomic<std::size_t> next_job_seq_{1};
};

} // namespace acrlab
