#include "tierrank/config.hpp"

#include "tierrank/errors.hpp"
#include "tierrank/json_io.hpp"

#include <cctype>
#include <set>

namespace tierrank {

using nlohmann::json;

std::string credential_env_for(std::string_view label) {
    std::string out;
    for (char c : label) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            out.push_back(static_cast<char>(std::toupper(u)));
        } else if (!out.empty() && out.back() != '_') {
            out.push_back('_');
        }
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out + "_API_KEY";
}

void StudyConfig::check() const {
    std::vector<std::string> problems;
    if (studyId.empty()) problems.push_back("studyId is empty");
    if (candidatesPerThread < 1) problems.push_back("candidatesPerThread must be >= 1");
    if (!(targetAlpha > 0.0) || targetAlpha > 1.0) problems.push_back("targetAlpha must lie in (0, 1]");

    std::set<std::string> ids;
    for (const auto& a : assessors) {
        if (a.assessorId.empty()) problems.push_back("assessor with empty id");
        if (!ids.insert(a.assessorId).second) problems.push_back("duplicate assessor id " + a.assessorId);
    }

    std::set<std::string> labels;
    auto check_endpoint = [&](const ModelEndpoint& e, const char* role) {
        if (e.label.empty()) problems.push_back(std::string(role) + " endpoint with empty label");
        if (!labels.insert(e.label).second) problems.push_back("duplicate endpoint label " + e.label);
        if (!(e.timeoutSeconds > 0.0)) problems.push_back("endpoint " + e.label + " timeout must be > 0");
    };
    for (const auto& g : generators) check_endpoint(g, "generator");
    for (const auto& e : aiAssessors) {
        check_endpoint(e, "AI assessor");
        bool found = false;
        for (const auto& a : assessors) found |= a.assessorId == e.label && a.kind == AssessorKind::AI;
        if (!found) problems.push_back("AI endpoint " + e.label + " has no matching AI assessor in the roster");
    }
    if (!generators.empty() && static_cast<int>(generators.size()) != candidatesPerThread) {
        problems.push_back("candidatesPerThread (" + std::to_string(candidatesPerThread) + ") differs from generator count (" +
                           std::to_string(generators.size()) + ")");
    }
    if (!problems.empty()) throw ValidationError("invalid study config", std::move(problems));
}

void to_json(json& j, const ModelEndpoint& e) {
    j = json{{"label", e.label},
             {"baseUrl", e.baseUrl},
             {"path", e.path},
             {"model", e.model.empty() ? e.label : e.model},
             {"credentialEnv", e.credentialEnv.empty() ? credential_env_for(e.label) : e.credentialEnv},
             {"timeoutSeconds", e.timeoutSeconds},
             {"temperature", e.temperature},
             {"maxTokens", e.maxTokens}};
}

void from_json(const json& j, ModelEndpoint& e) {
    e.label = j.at("label").get<std::string>();
    e.baseUrl = j.value("baseUrl", std::string{});
    e.path = j.value("path", std::string{"/v1/chat/completions"});
    e.model = j.value("model", e.label);
    e.credentialEnv = j.value("credentialEnv", credential_env_for(e.label));
    e.timeoutSeconds = j.value("timeoutSeconds", 120.0);
    e.temperature = j.value("temperature", e.temperature);
    e.maxTokens = j.value("maxTokens", 2048);
}

void to_json(json& j, const StudyConfig& c) {
    j = json{{"studyId", c.studyId},
             {"candidatesPerThread", c.candidatesPerThread},
             {"assessors", c.assessors},
             {"generators", c.generators},
             {"aiAssessors", c.aiAssessors},
             {"targetAlpha", c.targetAlpha},
             {"seed", c.seed},
             {"storageRoot", c.storageRoot}};
}

void from_json(const json& j, StudyConfig& c) {
    c.studyId = j.at("studyId").get<std::string>();
    c.candidatesPerThread = j.value("candidatesPerThread", 11);
    c.assessors = j.value("assessors", std::vector<AssessorProfile>{});
    c.generators.clear();
    for (const auto& g : j.value("generators", json::array())) {
        ModelEndpoint e;
        e.temperature = kDefaultGenerationTemperature;
        from_json(g, e);
        c.generators.push_back(std::move(e));
    }
    c.aiAssessors.clear();
    for (const auto& a : j.value("aiAssessors", json::array())) {
        ModelEndpoint e;
        e.temperature = kDefaultJudgingTemperature;
        from_json(a, e);
        c.aiAssessors.push_back(std::move(e));
    }
    c.targetAlpha = j.value("targetAlpha", 0.667);
    c.seed = j.value("seed", std::uint64_t{0});
    c.storageRoot = j.value("storageRoot", std::string{});
}

}  // namespace tierrank
