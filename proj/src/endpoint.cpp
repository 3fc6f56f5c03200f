#include "tierrank/endpoint.hpp"

#include "tierrank/errors.hpp"
#include "tierrank/protocol.hpp"

#include <httplib.h>

#include <algorithm>
#include <array>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace tierrank {

namespace fs = std::filesystem;
using nlohmann::json;

HttpChatEndpoint::HttpChatEndpoint(ModelEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    if (endpoint_.model.empty()) endpoint_.model = endpoint_.label;
    if (endpoint_.credentialEnv.empty()) endpoint_.credentialEnv = credential_env_for(endpoint_.label);
}

json HttpChatEndpoint::request_body(const ChatRequest& request) const {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json body{{"model", endpoint_.model},
              {"messages", messages},
              {"temperature", request.temperature},
              {"max_tokens", request.maxTokens}};
    if (request.responseSchema) {
        body["response_format"] = {
            {"type", "json_schema"},
            {"json_schema", {{"name", request.context.task == TaskKind::Judging ? "rankings" : "subject"},
                             {"strict", true},
                             {"schema", *request.responseSchema}}}};
    }
    return body;
}

std::string HttpChatEndpoint::complete(const ChatRequest& request) {
    if (endpoint_.baseUrl.empty()) throw TransportError("endpoint " + endpoint_.label + " has no base URL");
    httplib::Client client(endpoint_.baseUrl);
    const auto seconds = static_cast<time_t>(endpoint_.timeoutSeconds);
    const auto micros = static_cast<time_t>((endpoint_.timeoutSeconds - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);

    httplib::Headers headers;
    if (const char* key = std::getenv(endpoint_.credentialEnv.c_str()); key != nullptr && *key != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto res = client.Post(endpoint_.path, headers, request_body(request).dump(), "application/json");
    if (!res) throw TransportError(endpoint_.label + ": " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
        throw TransportError(endpoint_.label + ": HTTP " + std::to_string(res->status) + " " + res->body.substr(0, 200));
    }
    try {
        const auto payload = json::parse(res->body);
        return payload.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw TransportError(endpoint_.label + ": unexpected provider response: " + e.what());
    }
}

namespace {

constexpr std::array<const char*, 24> kVocabulary = {
    "Konflikt", "mit",    "Mutter",  "eskaliert", "Angst",     "vor",     "Zukunft",   "Trennung",
    "belastet", "Schule", "Sorgen",  "um",        "Freundin",  "Streit",  "Familie",   "Einsamkeit",
    "nach",     "Umzug",  "Druck",   "im",        "Studium",   "Schlaf",  "Probleme",  "Hilfe"};

double unit_from_digest(std::string_view key) {
    const auto hex = sha256_hex(key).substr(0, 8);
    return static_cast<double>(std::stoul(hex, nullptr, 16)) / 4294967296.0;
}

}  // namespace

std::string SyntheticEndpoint::complete(const ChatRequest& request) {
    const auto& ctx = request.context;
    if (ctx.task == TaskKind::Generation) {
        const auto digest = sha256_hex(label_ + "\x1F" + ctx.threadId);
        const int words = 3 + static_cast<int>(std::stoul(digest.substr(0, 2), nullptr, 16) % 4);
        std::string subject;
        for (int i = 0; i < words; ++i) {
            const auto idx = std::stoul(digest.substr(2 + 2 * static_cast<std::size_t>(i), 2), nullptr, 16) % kVocabulary.size();
            if (i > 0) subject.push_back(' ');
            subject += kVocabulary[idx];
        }
        return json{{"Subject", subject}}.dump();
    }

    struct Scored {
        CandidateHash id;
        double score;
    };
    std::vector<Scored> scored;
    for (const auto& id : ctx.candidateIds) {
        const double quality = unit_from_digest("quality\x1F" + id.str());
        const double noise = unit_from_digest(label_ + "\x1F" + id.str());
        scored.push_back({id, quality + 0.3 * noise});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    json rankings = json::array();
    for (std::size_t i = 0; i < scored.size(); ++i) {
        const double s = scored[i].score;
        const char* bucket = s >= 0.85 ? "Good" : (s >= 0.5 ? "Fair" : "Poor");
        rankings.push_back({{"id", scored[i].id.str()}, {"rank", i + 1}, {"bucket", bucket}});
    }
    return json{{"rankings", rankings}}.dump();
}

FixtureEndpoint::FixtureEndpoint(ModelLabel label, fs::path dir, std::shared_ptr<ChatEndpoint> fallback)
    : label_(std::move(label)), dir_(std::move(dir)), fallback_(std::move(fallback)) {}

std::string FixtureEndpoint::complete(const ChatRequest& request) {
    const fs::path cell = dir_ / label_ / request.context.threadId;
    const auto attempt = std::to_string(request.context.attempt);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    };
    if (fs::exists(cell / (attempt + ".error"))) throw TransportError(slurp(cell / (attempt + ".error")));
    if (fs::exists(cell / (attempt + ".json"))) return slurp(cell / (attempt + ".json"));
    if (fs::exists(cell / "default.json")) return slurp(cell / "default.json");
    if (fallback_) return fallback_->complete(request);
    throw TransportError("no fixture for " + label_ + "/" + request.context.threadId + "/" + attempt);
}

EndpointFactory fixture_endpoint_factory(fs::path dir) {
    return [dir = std::move(dir)](const ModelEndpoint& e) -> std::shared_ptr<ChatEndpoint> {
        return std::make_shared<FixtureEndpoint>(e.label, dir, std::make_shared<SyntheticEndpoint>(e.label));
    };
}

EndpointFactory http_endpoint_factory() {
    return [](const ModelEndpoint& e) -> std::shared_ptr<ChatEndpoint> { return std::make_shared<HttpChatEndpoint>(e); };
}

}  // namespace tierrank
