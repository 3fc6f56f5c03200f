#include "tierrank/json_io.hpp"

#include "tierrank/errors.hpp"

namespace tierrank {

using nlohmann::json;

void to_json(json& j, const CandidateHash& h) { j = h.str(); }
void from_json(const json& j, CandidateHash& h) { h = CandidateHash(j.get<std::string>()); }

void to_json(json& j, Role r) { j = std::string(to_string(r)); }
void from_json(const json& j, Role& r) { r = parse_role(j.get<std::string>()); }
void to_json(json& j, QualityBucket b) { j = std::string(to_string(b)); }
void from_json(const json& j, QualityBucket& b) { b = parse_bucket(j.get<std::string>()); }
void to_json(json& j, AssessorKind k) { j = std::string(to_string(k)); }
void from_json(const json& j, AssessorKind& k) { k = parse_assessor_kind(j.get<std::string>()); }

void to_json(json& j, const Message& m) {
    j = json{{"role", m.role}, {"date", format_date(m.date)}, {"time", format_time(m.time)}, {"content", m.content}};
}

void from_json(const json& j, Message& m) {
    m.role = j.at("role").get<Role>();
    m.date = parse_date(j.at("date").get<std::string>());
    m.time = parse_time(j.at("time").get<std::string>());
    m.content = j.at("content").get<std::string>();
}

void to_json(json& j, const EmailThread& t) { j = json{{"threadId", t.threadId}, {"messages", t.messages}}; }

void from_json(const json& j, EmailThread& t) {
    t.threadId = j.at("threadId").get<std::string>();
    t.messages = j.at("messages").get<std::vector<Message>>();
}

void to_json(json& j, const SubjectCandidate& c) {
    j = json{{"candidateHash", c.candidateHash},
             {"threadId", c.threadId},
             {"generatorModel", c.generatorModel},
             {"subjectText", c.subjectText}};
}

void from_json(const json& j, SubjectCandidate& c) {
    c.candidateHash = j.at("candidateHash").get<CandidateHash>();
    c.threadId = j.at("threadId").get<std::string>();
    c.generatorModel = j.at("generatorModel").get<std::string>();
    c.subjectText = j.at("subjectText").get<std::string>();
}

void to_json(json& j, const AssessorProfile& a) {
    j = json{{"assessorId", a.assessorId}, {"kind", a.kind}, {"label", a.label}};
}

void from_json(const json& j, AssessorProfile& a) {
    a.assessorId = j.at("assessorId").get<std::string>();
    a.kind = j.at("kind").get<AssessorKind>();
    a.label = j.value("label", a.assessorId);
}

void to_json(json& j, const Assessment& a) {
    j = json{{"assessorId", a.assessorId},
             {"threadId", a.threadId},
             {"candidateHash", a.candidateHash},
             {"bucket", a.bucket},
             {"globalRank", a.globalRank}};
}

void from_json(const json& j, Assessment& a) {
    a.assessorId = j.at("assessorId").get<std::string>();
    a.threadId = j.at("threadId").get<std::string>();
    a.candidateHash = j.at("candidateHash").get<CandidateHash>();
    a.bucket = j.at("bucket").get<QualityBucket>();
    a.globalRank = j.at("globalRank").get<int>();
    if (a.globalRank < 1) throw ValidationError("globalRank must be >= 1");
}

void to_json(json& j, const StudyDataset& d) {
    j = json{{"threads", d.threads}, {"candidates", d.candidates}, {"assessors", d.assessors}, {"assessments", d.assessments}};
}

void from_json(const json& j, StudyDataset& d) {
    d.threads = j.at("threads").get<std::vector<EmailThread>>();
    d.candidates = j.at("candidates").get<std::vector<SubjectCandidate>>();
    d.assessors = j.at("assessors").get<std::vector<AssessorProfile>>();
    d.assessments = j.at("assessments").get<std::vector<Assessment>>();
}

void to_json(json& j, const BucketedOrder& b) { j = json{{"Good", b.good}, {"Fair", b.fair}, {"Poor", b.poor}}; }

void from_json(const json& j, BucketedOrder& b) {
    if (!j.is_object()) throw ValidationError("submission must be an object with Good/Fair/Poor lists");
    for (const auto& [key, value] : j.items()) {
        b.of(parse_bucket(key)) = value.get<std::vector<CandidateHash>>();
    }
}

}  // namespace tierrank
