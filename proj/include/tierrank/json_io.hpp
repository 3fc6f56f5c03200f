#pragma once

// JSON mapping for the domain types. Field names match the struct members;
// enums serialise by name ("Good", "Client", "Human", ...).

#include "tierrank/protocol.hpp"
#include "tierrank/types.hpp"

#include <json.hpp>

namespace tierrank {

void to_json(nlohmann::json& j, const CandidateHash& h);
void from_json(const nlohmann::json& j, CandidateHash& h);

void to_json(nlohmann::json& j, Role r);
void from_json(const nlohmann::json& j, Role& r);
void to_json(nlohmann::json& j, QualityBucket b);
void from_json(const nlohmann::json& j, QualityBucket& b);
void to_json(nlohmann::json& j, AssessorKind k);
void from_json(const nlohmann::json& j, AssessorKind& k);

void to_json(nlohmann::json& j, const Message& m);
void from_json(const nlohmann::json& j, Message& m);
void to_json(nlohmann::json& j, const EmailThread& t);
void from_json(const nlohmann::json& j, EmailThread& t);
void to_json(nlohmann::json& j, const SubjectCandidate& c);
void from_json(const nlohmann::json& j, SubjectCandidate& c);
void to_json(nlohmann::json& j, const AssessorProfile& a);
void from_json(const nlohmann::json& j, AssessorProfile& a);
void to_json(nlohmann::json& j, const Assessment& a);
void from_json(const nlohmann::json& j, Assessment& a);
void to_json(nlohmann::json& j, const StudyDataset& d);
void from_json(const nlohmann::json& j, StudyDataset& d);

void to_json(nlohmann::json& j, const BucketedOrder& b);
void from_json(const nlohmann::json& j, BucketedOrder& b);

}  // namespace tierrank
