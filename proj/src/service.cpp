#include "tierrank/service.hpp"

#include "tierrank/errors.hpp"
#include "tierrank/json_io.hpp"
#include "tierrank/pipeline.hpp"
#include "tierrank/protocol.hpp"

#include <httplib.h>

#include <chrono>
#include <ctime>
#include <set>

namespace tierrank {

using nlohmann::json;

namespace {

ApiResponse error(int status, std::string code, std::string message, std::vector<std::string> diagnostics = {}) {
    return {status, {{"error", {{"code", std::move(code)}, {"message", std::move(message)}, {"diagnostics", diagnostics}}}}};
}

}  // namespace

std::string session_id_for(std::string_view studyId, std::string_view assessorId, std::string_view threadId) {
    std::string key = "session";
    for (auto part : {studyId, assessorId, threadId}) {
        key.push_back('\x1F');
        key.append(part);
    }
    return sha256_hex(key).substr(0, 16);
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

SessionService::SessionService(StudyStore& store, Clock clock) : store_(store), clock_(std::move(clock)) {}

std::optional<AssessorId> SessionService::authenticate(std::string_view authorization) const {
    constexpr std::string_view kPrefix = "Bearer ";
    if (authorization.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
    const auto token = authorization.substr(kPrefix.size());
    if (token.empty()) return std::nullopt;
    for (const auto& [assessor, t] : store_.tokens()) {
        if (t == token) return assessor;
    }
    return std::nullopt;
}

ApiResponse SessionService::open_session(std::string_view studyId, std::string_view authorization, std::string_view body) {
    const auto assessor = authenticate(authorization);
    if (!assessor) return error(401, "unauthorized", "unknown or missing bearer token");
    if (studyId != store_.config().studyId) return error(404, "not_found", "unknown study " + std::string(studyId));

    std::string threadId;
    try {
        threadId = json::parse(body).at("threadId").get<std::string>();
    } catch (const json::exception& e) {
        return error(422, "malformed_request", std::string("expected {\"threadId\": \"...\"}: ") + e.what());
    }

    const auto state = store_.snapshot();
    if (!state->dataset.find_thread(threadId)) return error(404, "not_found", "unknown thread " + threadId);
    if (state->submitted(*assessor, threadId)) return error(409, "already_submitted", "thread already assessed");
    const auto count = state->dataset.candidates_for(threadId).size();
    if (static_cast<int>(count) != store_.config().candidatesPerThread) {
        return error(409, "stage_not_complete",
                     "thread has " + std::to_string(count) + " of " + std::to_string(store_.config().candidatesPerThread) +
                         " candidates");
    }

    const SessionRecord record{session_id_for(studyId, *assessor, threadId), *assessor, threadId};
    const bool existed = state->sessions.count(record.sessionId) > 0;
    store_.append_session(record);
    return {existed ? 200 : 201, {{"sessionId", record.sessionId}, {"threadId", threadId}, {"state", "open"}}};
}

ApiResponse SessionService::get_session(std::string_view sessionId, std::string_view authorization) const {
    const auto assessor = authenticate(authorization);
    if (!assessor) return error(401, "unauthorized", "unknown or missing bearer token");
    const auto state = store_.snapshot();
    auto it = state->sessions.find(std::string(sessionId));
    if (it == state->sessions.end() || it->second.assessorId != *assessor) {
        return error(404, "not_found", "unknown session " + std::string(sessionId));
    }
    const auto& session = it->second;
    const auto* thread = state->dataset.find_thread(session.threadId);

    json candidates = json::array();
    for (const auto& c : presentation_for(state->dataset, store_.config().seed, session.assessorId, session.threadId)) {
        candidates.push_back({{"candidateHash", c.candidateHash}, {"subjectText", c.subjectText}});
    }
    json payload{{"sessionId", session.sessionId},
                 {"studyId", store_.config().studyId},
                 {"threadId", session.threadId},
                 {"thread", {{"threadId", thread->threadId}, {"messages", thread->messages}, {"text", format_thread_for_prompt(*thread)}}},
                 {"candidates", candidates}};

    auto sub = state->submissions.find({session.assessorId, session.threadId});
    if (sub == state->submissions.end()) {
        payload["state"] = "open";
    } else {
        payload["state"] = "submitted";
        payload["submittedAt"] = sub->second.submittedAt;
        std::vector<RankedCandidate> ranked;
        for (const auto& a : state->dataset.assessments) {
            if (a.assessorId == session.assessorId && a.threadId == session.threadId) {
                ranked.push_back({a.candidateHash, a.globalRank, a.bucket});
            }
        }
        payload["result"] = split_by_bucket(ranked);
    }
    return {200, payload};
}

ApiResponse SessionService::submit(std::string_view sessionId, std::string_view authorization, std::string_view body) {
    const auto assessor = authenticate(authorization);
    if (!assessor) return error(401, "unauthorized", "unknown or missing bearer token");
    const auto state = store_.snapshot();
    auto it = state->sessions.find(std::string(sessionId));
    if (it == state->sessions.end() || it->second.assessorId != *assessor) {
        return error(404, "not_found", "unknown session " + std::string(sessionId));
    }
    const auto session = it->second;
    if (state->submitted(session.assessorId, session.threadId)) {
        return error(409, "already_submitted", "session " + session.sessionId + " was already submitted");
    }

    BucketedOrder order;
    try {
        order = json::parse(body).get<BucketedOrder>();
    } catch (const std::exception& e) {
        return error(422, "malformed_submission", e.what());
    }

    std::set<CandidateHash> expected;
    for (const auto* c : state->dataset.candidates_for(session.threadId)) expected.insert(c->candidateHash);

    std::vector<Assessment> group;
    try {
        group = to_assessments(merge_bucket_rankings(order, expected), session.assessorId, session.threadId);
    } catch (const ValidationError& e) {
        return error(422, "protocol_violation", e.what(), e.details());
    }
    if (const auto verdict = validate_ranking(group, expected); !verdict.ok()) {
        return error(422, "protocol_violation", "ranking failed validation", verdict.diagnostics());
    }

    try {
        store_.append_assessments(group, SubmissionRecord{session.sessionId, clock_()});
    } catch (const ValidationError& e) {
        if (store_.snapshot()->submitted(session.assessorId, session.threadId)) {
            return error(409, "already_submitted", "session " + session.sessionId + " was already submitted");
        }
        return error(422, "protocol_violation", e.what(), e.details());
    }
    return {200, {{"sessionId", session.sessionId}, {"state", "submitted"}, {"assessments", group}}};
}

struct HttpApiServer::Impl {
    SessionService& service;
    httplib::Server server;
    std::thread thread;

    explicit Impl(SessionService& s) : service(s) {
        auto reply = [](httplib::Response& res, const ApiResponse& r) {
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json; charset=utf-8");
        };
        server.Post(R"(/studies/([^/]+)/sessions)", [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, service.open_session(req.matches[1].str(), req.get_header_value("Authorization"), req.body));
        });
        server.Get(R"(/sessions/([^/]+))", [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, service.get_session(req.matches[1].str(), req.get_header_value("Authorization")));
        });
        server.Post(R"(/sessions/([^/]+)/submission)", [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, service.submit(req.matches[1].str(), req.get_header_value("Authorization"), req.body));
        });
    }
};

HttpApiServer::HttpApiServer(SessionService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpApiServer::~HttpApiServer() { stop(); }

int HttpApiServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

bool HttpApiServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

void HttpApiServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace tierrank
