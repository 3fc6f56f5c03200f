#pragma once

// Append-only study persistence.
//
// A study lives in one directory:
//   config        StudyConfig as JSON
//   events.log    one JSON event per line
//   tokens.json   bearer token per human assessor
//   reports/      outputs of filter / analyze / report
//
// Every append is one line written with a single write() and fsync'd. A line
// without its terminating newline is an interrupted append and is ignored on
// load, so the log always replays to a prefix of accepted appends.

#include "tierrank/config.hpp"
#include "tierrank/types.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tierrank {

struct SessionRecord {
    std::string sessionId;
    AssessorId assessorId;
    ThreadId threadId;
};

struct SubmissionRecord {
    std::string sessionId;
    std::string submittedAt;
};

/// Replayed state. Immutable once published.
struct StudyState {
    StudyDataset dataset;
    std::map<std::string, SessionRecord> sessions;
    std::map<std::pair<AssessorId, ThreadId>, SubmissionRecord> submissions;

    bool submitted(const AssessorId& assessor, const ThreadId& thread) const {
        return submissions.count({assessor, thread}) > 0;
    }
};

class StudyStore {
public:
    /// Creates {root}/{config.studyId} with config, empty log and tokens.
    /// Fails if the directory already holds a study.
    static StudyStore create(const std::filesystem::path& root, StudyConfig config);
    static StudyStore open(const std::filesystem::path& studyDir);

    StudyStore(StudyStore&&) noexcept;
    StudyStore& operator=(StudyStore&&) noexcept;
    ~StudyStore();

    const StudyConfig& config() const noexcept;
    const std::filesystem::path& dir() const noexcept;
    std::filesystem::path reports_dir() const;
    /// Human assessorId -> bearer token.
    const std::map<AssessorId, std::string>& tokens() const noexcept;

    /// Current state; safe to hold while other threads append.
    std::shared_ptr<const StudyState> snapshot() const;

    // Each append is validated against the current state and committed as
    // one event, or rejected with ValidationError and nothing written.
    void append_threads(std::vector<EmailThread> threads);
    void append_candidates(std::vector<SubjectCandidate> candidates);
    void append_assessments(std::vector<Assessment> group, std::optional<SubmissionRecord> submission = std::nullopt);
    /// Re-opening a known session is a no-op.
    void append_session(const SessionRecord& session);

private:
    struct Impl;
    explicit StudyStore(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

/// Replays a study's log. Throws StorageError naming the offending line.
StudyDataset load_dataset(const std::filesystem::path& studyDir);

StudyConfig load_config(const std::filesystem::path& studyDir);

}  // namespace tierrank
