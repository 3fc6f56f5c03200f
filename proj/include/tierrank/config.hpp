#pragma once

#include "tierrank/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace tierrank {

/// One model reachable over a chat-completion API.
struct ModelEndpoint {
    ModelLabel label;
    /// e.g. "https://api.openai.com"; empty for endpoints only used with --mock.
    std::string baseUrl;
    std::string path = "/v1/chat/completions";
    /// Provider-side model name; defaults to the label.
    std::string model;
    /// Environment variable holding the API key; defaults to
    /// credential_env_for(label).
    std::string credentialEnv;
    double timeoutSeconds = 120.0;
    double temperature = 0.0;
    int maxTokens = 2048;
};

/// "gpt-4o" -> "GPT_4O_API_KEY".
std::string credential_env_for(std::string_view label);

struct StudyConfig {
    std::string studyId;
    int candidatesPerThread = 11;
    std::vector<AssessorProfile> assessors;
    std::vector<ModelEndpoint> generators;
    /// Each label must equal the assessorId of an AI assessor in `assessors`.
    std::vector<ModelEndpoint> aiAssessors;
    double targetAlpha = 0.667;
    std::uint64_t seed = 0;
    std::string storageRoot;

    /// Throws ValidationError listing every broken invariant.
    void check() const;
};

inline constexpr double kDefaultGenerationTemperature = 0.7;
inline constexpr double kDefaultJudgingTemperature = 0.0;

void to_json(nlohmann::json& j, const ModelEndpoint& e);
/// An absent "temperature" keeps the value already in `e`.
void from_json(const nlohmann::json& j, ModelEndpoint& e);
void to_json(nlohmann::json& j, const StudyConfig& c);
void from_json(const nlohmann::json& j, StudyConfig& c);

}  // namespace tierrank
