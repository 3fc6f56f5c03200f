#pragma once

// Blinded human-assessment sessions.
//
//   POST /studies/{id}/sessions        {"threadId": "..."}       -> 201 session
//   GET  /sessions/{sid}                                         -> 200 payload
//   POST /sessions/{sid}/submission    {"Good": [...], "Fair": [...], "Poor": [...]}
//
// Every request carries "Authorization: Bearer <token>". Errors answer
// {"error": {"code", "message", "diagnostics"}} with 401 (unknown token),
// 404 (unknown study/session/thread), 409 (already submitted or candidates
// not generated yet) or 422 (malformed body or protocol violation).
//
// Payloads expose candidate hashes and subject texts only.

#include "tierrank/store.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

namespace tierrank {

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

/// Stable id for one (study, assessor, thread) session.
std::string session_id_for(std::string_view studyId, std::string_view assessorId, std::string_view threadId);

/// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

class SessionService {
public:
    using Clock = std::function<std::string()>;

    explicit SessionService(StudyStore& store, Clock clock = utc_timestamp);

    ApiResponse open_session(std::string_view studyId, std::string_view authorization, std::string_view body);
    ApiResponse get_session(std::string_view sessionId, std::string_view authorization) const;
    ApiResponse submit(std::string_view sessionId, std::string_view authorization, std::string_view body);

private:
    std::optional<AssessorId> authenticate(std::string_view authorization) const;

    StudyStore& store_;
    Clock clock_;
};

/// cpp-httplib binding of SessionService.
class HttpApiServer {
public:
    explicit HttpApiServer(SessionService& service);
    ~HttpApiServer();

    HttpApiServer(const HttpApiServer&) = delete;
    HttpApiServer& operator=(const HttpApiServer&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port.
    /// Returns the bound port.
    int start(const std::string& host, int port);
    /// Binds and serves on the calling thread until stop().
    bool listen(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace tierrank
