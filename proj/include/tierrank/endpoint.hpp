#pragma once

// Chat-completion transport. Pipeline code talks to ChatEndpoint only; the
// HTTP adapter, the fixture adapter and scripted test doubles plug in here.

#include "tierrank/config.hpp"
#include "tierrank/types.hpp"

#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tierrank {

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

enum class TaskKind { Generation, Judging };

/// Routing metadata for adapters. Never sent over the wire.
struct RequestContext {
    TaskKind task = TaskKind::Generation;
    ThreadId threadId;
    /// 1-based attempt index within one cell.
    int attempt = 1;
    /// Judging only: the blinded ids in presentation order.
    std::vector<CandidateHash> candidateIds;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int maxTokens = 2048;
    /// JSON schema for provider-side structured output, when supported.
    std::optional<nlohmann::json> responseSchema;
    RequestContext context;
};

class ChatEndpoint {
public:
    virtual ~ChatEndpoint() = default;

    virtual const ModelLabel& label() const noexcept = 0;

    /// Returns the assistant text. Throws TransportError on any transport or
    /// provider failure.
    virtual std::string complete(const ChatRequest& request) = 0;
};

using EndpointFactory = std::function<std::shared_ptr<ChatEndpoint>(const ModelEndpoint&)>;

/// OpenAI-compatible chat completions over HTTP(S). The bearer token is read
/// from the endpoint's credential environment variable at call time.
class HttpChatEndpoint final : public ChatEndpoint {
public:
    explicit HttpChatEndpoint(ModelEndpoint endpoint);

    const ModelLabel& label() const noexcept override { return endpoint_.label; }
    std::string complete(const ChatRequest& request) override;

    /// Request body as sent to the provider.
    nlohmann::json request_body(const ChatRequest& request) const;

private:
    ModelEndpoint endpoint_;
};

/// Deterministic in-process responder. Generation answers with a short
/// subject picked from a fixed vocabulary; judging ranks the request's
/// candidate ids by a shared latent quality plus per-assessor noise and fills
/// buckets in sequence.
class SyntheticEndpoint final : public ChatEndpoint {
public:
    explicit SyntheticEndpoint(ModelLabel label) : label_(std::move(label)) {}

    const ModelLabel& label() const noexcept override { return label_; }
    std::string complete(const ChatRequest& request) override;

private:
    ModelLabel label_;
};

/// Canned responses from a fixture directory:
///   {dir}/{label}/{threadId}/{attempt}.json   response text for that attempt
///   {dir}/{label}/{threadId}/{attempt}.error  transport failure with that message
///   {dir}/{label}/{threadId}/default.json     any attempt without its own file
/// Cells without fixtures fall through to `fallback` (a SyntheticEndpoint
/// unless replaced); with no fallback they raise TransportError.
class FixtureEndpoint final : public ChatEndpoint {
public:
    FixtureEndpoint(ModelLabel label, std::filesystem::path dir,
                    std::shared_ptr<ChatEndpoint> fallback = nullptr);

    const ModelLabel& label() const noexcept override { return label_; }
    std::string complete(const ChatRequest& request) override;

private:
    ModelLabel label_;
    std::filesystem::path dir_;
    std::shared_ptr<ChatEndpoint> fallback_;
};

/// Test double: answers from a callback.
class ScriptedEndpoint final : public ChatEndpoint {
public:
    using Script = std::function<std::string(const ChatRequest&)>;

    ScriptedEndpoint(ModelLabel label, Script script) : label_(std::move(label)), script_(std::move(script)) {}

    const ModelLabel& label() const noexcept override { return label_; }
    std::string complete(const ChatRequest& request) override {
        ++calls_;
        return script_(request);
    }

    int calls() const noexcept { return calls_.load(); }

private:
    ModelLabel label_;
    Script script_;
    std::atomic<int> calls_{0};
};

/// Factory for --mock runs: FixtureEndpoint over `dir` with synthetic fallback.
EndpointFactory fixture_endpoint_factory(std::filesystem::path dir);

/// Factory for live runs.
EndpointFactory http_endpoint_factory();

}  // namespace tierrank
