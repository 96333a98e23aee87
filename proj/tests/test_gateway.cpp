#include <gtest/gtest.h>

#include <chrono>

#include "acrlab/gateway.hpp"
#include "acrlab/rng.hpp"
#include "testutil.hpp"

using namespace acrlab;
using namespace std::chrono;

namespace {

ChatJob make_job(const std::string& model, const std::string& key_purpose,
                 const std::string& text = "hello") {
    ChatJob job;
    job.model_id = model;
    job.messages = {{"user", text}};
    job.routing = {"camp", "target", key_purpose};
    return job;
}

std::unique_ptr<Gateway> make_mock_gateway(double in_price = 0.0, double out_price = 0.0) {
    return testutil::make_mock_gateway({"m"}, in_price, out_price);
}

} // namespace

TEST(MockGateway, ScriptedEcho) {
    auto gwp = make_mock_gateway();
    Gateway& gw = *gwp;
    gw.script_mock(RoutingKey{"camp", "target", "p"}, {{"VERDICT: VULNERABLE", {}, {}}});
    const ChatResult r = gw.complete(make_job("m", "p"));
    EXPECT_EQ(r.text, "VERDICT: VULNERABLE");
    EXPECT_EQ(r.backend_kind, BackendKind::mock);
}

TEST(MockGateway, FifoAndExhaustion) {
    auto gwp = make_mock_gateway();
    Gateway& gw = *gwp;
    gw.script_mock("camp|target|p", {{"A", {}, {}}, {"B", {}, {}}});
    EXPECT_EQ(gw.complete(make_job("m", "p")).text, "A");
    EXPECT_EQ(gw.complete(make_job("m", "p")).text, "B");
    try {
        gw.complete(make_job("m", "p"));
        FAIL() << "expected ScriptExhausted";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::script_exhausted);
    }
}

TEST(MockGateway, DuplicateScriptOnUnconsumedQueue) {
    auto gwp = make_mock_gateway();
    Gateway& gw = *gwp;
    gw.script_mock("camp|target|p", {{"A", {}, {}}});
    try {
        gw.script_mock("camp|target|p", {{"B", {}, {}}});
        FAIL() << "expected DuplicateScript";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::duplicate_script);
    }
    gw.complete(make_job("m", "p"));
    gw.script_mock("camp|target|p", {{"B", {}, {}}}); // consumed queue may be rescripted
    EXPECT_EQ(gw.complete(make_job("m", "p")).text, "B");
}

TEST(MockGateway, FallbackQueueServesUnknownKeys) {
    auto gwp = make_mock_gateway();
    Gateway& gw = *gwp;
    gw.script_mock("*", {{"fallback", {}, {}}});
    EXPECT_EQ(gw.complete(make_job("m", "anything")).text, "fallback");
}

TEST(MockGateway, DefaultTokenCountingIsCeilLenOver4) {
    auto gwp = make_mock_gateway();
    Gateway& gw = *gwp;
    gw.script_mock("camp|target|p", {{"abcdefghi", {}, {}}}); // 9 chars -> 3 tokens
    const ChatResult r = gw.complete(make_job("m", "p", "12345678")); // 8 chars -> 2 tokens
    EXPECT_EQ(r.output_tokens, 3);
    EXPECT_EQ(r.input_tokens, 2);
}

TEST(MockGateway, ValidatesJobs) {
    auto gwp = make_mock_gateway();
    Gateway& gw = *gwp;
    ChatJob no_messages = make_job("m", "p");
    no_messages.messages.clear();
    EXPECT_THROW(gw.complete(no_messages), Error);

    ChatJob bad_role = make_job("m", "p");
    bad_role.messages = {{"assistant", "hi"}};
    EXPECT_THROW(gw.complete(bad_role), Error);

    EXPECT_THROW(gw.complete(make_job("unregistered", "p")), Error);
}

TEST(CostLedger, UnitPriceArithmetic) {
    auto gwp = make_mock_gateway(3.0, 10.0);
    Gateway& gw = *gwp;
    gw.script_mock("camp|target|p", {{"x", 1000000, 0}});
    gw.complete(make_job("m", "p"));
    ASSERT_EQ(gw.ledger().size(), 1u);
    EXPECT_NEAR(gw.ledger().entries()[0].usd, 3.00, 1e-9);
}

TEST(CostLedger, EstimateCostExamples) {
    ProviderProfile p;
    p.input_usd_per_mtok = 2.0;
    p.output_usd_per_mtok = 10.0;
    EXPECT_DOUBLE_EQ(estimate_cost({0, 0}, p), 0.0);
    EXPECT_DOUBLE_EQ(estimate_cost({500000, 500000}, p), 6.0);
    EXPECT_THROW(estimate_cost({-1, 0}, p), Error);
}

TEST(CostLedger, ConservationUnderRandomAppends) {
    CostLedger ledger;
    SplitMix64 rng(3);
    double expected = 0.0;
    for (int i = 0; i < 500; ++i) {
        const double usd = static_cast<double>(rng.bounded(100000)) / 1000.0;
        expected += usd;
        ledger.append({"job-" + std::to_string(i), {0, 0}, usd, ""});
        EXPECT_NEAR(ledger.total_usd(), expected, 1e-9);
    }
    double sum = 0.0;
    for (const auto& e : ledger.entries()) sum += e.usd;
    EXPECT_NEAR(ledger.total_usd(), sum, 1e-9);
}

// Per-iteration usages back-computed from a $1/M-input profile so the
// 17-attack campaign ledger lands on the expected $19.36 total: tier sums
// 11.53 + 5.38 + 1.50 + 0.72 + 0.23.
TEST(CostLedger, SeventeenAttackCampaignTotal) {
    auto gwp = make_mock_gateway(1.0, 0.0);
    Gateway& gw = *gwp;
    std::vector<long long> usages;
    for (int i = 0; i < 16; ++i) usages.push_back(678235);
    usages.push_back(678240); // tier 1: 11,530,000 tokens
    for (int i = 0; i < 8; ++i) usages.push_back(672500);  // tier 2: 5,380,000
    for (int i = 0; i < 3; ++i) usages.push_back(500000);  // tier 3: 1,500,000
    for (int i = 0; i < 2; ++i) usages.push_back(360000);  // tier 4:   720,000
    usages.push_back(230000);                              // tier 5:   230,000

    std::vector<ScriptedResponse> responses;
    for (const auto u : usages) responses.push_back({"ok", u, 0});
    gw.script_mock("camp|target|p", responses);
    for (std::size_t i = 0; i < usages.size(); ++i) gw.complete(make_job("m", "p"));
    EXPECT_NEAR(gw.ledger().total_usd(), 19.36, 0.01);
}

TEST(MockGateway, DeterministicAcrossInstances) {
    const auto run = []() {
        Gateway gw(BackendKind::mock);
        ProviderProfile p;
        p.model_id = "m";
        gw.register_profile(p);
        gw.script_mock("camp|target|a", {{"first", {}, {}}, {"second", 7, 9}});
        gw.script_mock("camp|target|b", {{"third", {}, {}}});
        std::string transcript;
        for (const auto& key : {"a", "a", "b"}) {
            const ChatResult r = gw.complete(make_job("m", key));
            transcript += r.text + "|" + std::to_string(r.input_tokens) + "|" +
                          std::to_string(r.output_tokens) + "|" +
                          std::to_string(r.provider_latency.count()) + ";";
        }
        return transcript;
    };
    EXPECT_EQ(run(), run());
}

// --- live backend -----------------------------------------------------------

namespace {

struct FakeTransport {
    std::vector<TransportReply> replies;
    std::size_t calls = 0;

    Transport fn() {
        return [this](const ChatJob&, const ProviderProfile&) {
            const TransportReply reply = replies[std::min(calls, replies.size() - 1)];
            ++calls;
            return reply;
        };
    }
};

const char* kAnthropicOk =
    R"({"content":[{"type":"text","text":"fine"}],"usage":{"input_tokens":10,"output_tokens":5}})";

ProviderProfile live_profile() {
    ProviderProfile p;
    p.model_id = "m";
    p.rate_limit_per_min = 1000;
    return p;
}

} // namespace

TEST(LiveBackend, RetriesTransientFailuresThenSucceeds) {
    FakeTransport transport;
    transport.replies = {{0, "", "connection reset"}, {503, "", ""}, {200, kAnthropicOk, ""}};
    LiveBackend backend(transport.fn(), [](milliseconds) {}, 3);
    SlidingWindowLimiter limiter(1000);
    const ChatResult r = backend.complete(make_job("m", "p"), live_profile(), limiter);
    EXPECT_EQ(r.text, "fine");
    EXPECT_EQ(r.input_tokens, 10);
    EXPECT_EQ(r.backend_kind, BackendKind::live);
    EXPECT_EQ(transport.calls, 3u);
}

TEST(LiveBackend, GivesUpAfterThreeAttempts) {
    FakeTransport transport;
    transport.replies = {{500, "", ""}};
    LiveBackend backend(transport.fn(), [](milliseconds) {}, 3);
    SlidingWindowLimiter limiter(1000);
    try {
        backend.complete(make_job("m", "p"), live_profile(), limiter);
        FAIL() << "expected ProviderError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::provider_error);
    }
    EXPECT_EQ(transport.calls, 3u);
}

TEST(LiveBackend, RateLimitedSurfacesImmediately) {
    FakeTransport transport;
    transport.replies = {{429, "", ""}};
    LiveBackend backend(transport.fn(), [](milliseconds) {}, 3);
    SlidingWindowLimiter limiter(1000);
    try {
        backend.complete(make_job("m", "p"), live_profile(), limiter);
        FAIL() << "expected RateLimited";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::rate_limited);
    }
    EXPECT_EQ(transport.calls, 1u);
}

TEST(LiveBackend, ClientErrorsDoNotRetry) {
    FakeTransport transport;
    transport.replies = {{400, "", ""}};
    LiveBackend backend(transport.fn(), [](milliseconds) {}, 3);
    SlidingWindowLimiter limiter(1000);
    EXPECT_THROW(backend.complete(make_job("m", "p"), live_profile(), limiter), Error);
    EXPECT_EQ(transport.calls, 1u);
}

TEST(RateLimiter, NoWindowExceedsLimit) {
    using TimePoint = SlidingWindowLimiter::TimePoint;
    TimePoint now{};
    std::vector<TimePoint> acquired;
    SlidingWindowLimiter limiter(
        10, [&now]() { return now; },
        [&now](milliseconds wait) { now += wait; });
    for (int i = 0; i < 37; ++i) {
        limiter.acquire();
        acquired.push_back(now);
        now += milliseconds(350); // bursty but below the natural spacing
    }
    for (std::size_t i = 0; i < acquired.size(); ++i) {
        int in_window = 0;
        for (std::size_t j = 0; j < acquired.size(); ++j)
            if (acquired[j] >= acquired[i] && acquired[j] - acquired[i] < seconds(60)) ++in_window;
        EXPECT_LE(in_window, 10);
    }
}
