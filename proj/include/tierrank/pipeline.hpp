#pragma once

// Subject-line generation and AI-assessor judging against chat endpoints,
// with strict structured-output parsing and bounded re-requests.

#include "tierrank/endpoint.hpp"
#include "tierrank/protocol.hpp"
#include "tierrank/store.hpp"
#include "tierrank/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tierrank {

inline constexpr int kDefaultMaxAttempts = 20;

std::string build_generation_prompt(const EmailThread& thread);

/// Blinded candidate as shown to an assessor.
struct PresentedCandidate {
    CandidateHash candidateHash;
    std::string subjectText;
};

std::string build_judging_prompt(const EmailThread& thread, const std::vector<PresentedCandidate>& candidates);

const nlohmann::json& generation_schema();
const nlohmann::json& judging_schema();

enum class FailureKind { Transport, Malformed, Invalid };

std::string_view to_string(FailureKind k) noexcept;

struct AttemptRecord {
    int attempt = 1;
    bool accepted = false;
    std::optional<FailureKind> failure;
    std::vector<std::string> reasons;
    std::string raw;
};

struct DecodingSettings {
    double temperature = 0.0;
    int maxTokens = 2048;
};

struct GenerationResult {
    ThreadId threadId;
    ModelLabel model;
    std::vector<AttemptRecord> attempts;
    std::optional<SubjectCandidate> candidate;

    bool accepted() const noexcept { return candidate.has_value(); }
    int attempts_used() const noexcept { return static_cast<int>(attempts.size()); }
};

/// Parses {"Subject": "..."} strictly; nothing is trimmed or repaired.
/// Throws ValidationError when the text is not that shape.
std::string parse_generation_response(std::string_view raw);

GenerationResult generate_subject(ChatEndpoint& endpoint, const EmailThread& thread,
                                  int maxAttempts = kDefaultMaxAttempts,
                                  DecodingSettings decoding = {0.7, 2048});

struct JudgingResult {
    ThreadId threadId;
    AssessorId assessorId;
    std::vector<PresentedCandidate> presented;
    std::vector<AttemptRecord> attempts;
    std::optional<std::vector<Assessment>> assessments;

    bool accepted() const noexcept { return assessments.has_value(); }
    int attempts_used() const noexcept { return static_cast<int>(attempts.size()); }
};

/// Parses {"rankings": [{"id", "rank", "bucket"}, ...]} strictly.
std::vector<RankedCandidate> parse_judging_response(std::string_view raw);

/// `presented` is used in the given order; shuffle it beforehand.
JudgingResult judge_thread(ChatEndpoint& endpoint, const AssessorId& assessorId, const EmailThread& thread,
                           std::vector<PresentedCandidate> presented, int maxAttempts = kDefaultMaxAttempts,
                           DecodingSettings decoding = {0.0, 4096});

/// Candidates of `threadId` in the order assessor `assessorId` sees them.
std::vector<PresentedCandidate> presentation_for(const StudyDataset& dataset, std::uint64_t seed,
                                                 const AssessorId& assessorId, const ThreadId& threadId);

struct PipelineOptions {
    int concurrency = 1;
    int maxAttempts = kDefaultMaxAttempts;
    bool generate = true;
    bool judge = true;
};

enum class CellDisposition { Accepted, Rejected, Blocked, Skipped };

std::string_view to_string(CellDisposition d) noexcept;

struct CellReport {
    TaskKind stage = TaskKind::Generation;
    ThreadId threadId;
    ModelLabel endpoint;
    CellDisposition disposition = CellDisposition::Skipped;
    int attempts = 0;
    std::vector<std::string> reasons;
};

struct RunReport {
    std::vector<CellReport> cells;
    int endpointCalls = 0;

    std::size_t count(TaskKind stage, CellDisposition d) const;
    /// Every cell of every requested stage accepted now or earlier.
    bool complete() const;
};

nlohmann::json to_json_report(const RunReport& report);

/// Runs |threads| x |generators| generation cells, then |threads| x |AI
/// assessors| judging cells. Cells already present in the store are skipped
/// without calling their endpoint; accepted cells are committed in cell
/// order as soon as every earlier cell has finished, so output is identical
/// regardless of concurrency. An exception other than TransportError aborts
/// the run after in-flight cells finish; committed cells stay committed.
RunReport run_study_pipeline(StudyStore& store, const EndpointFactory& factory, const PipelineOptions& options = {});

}  // namespace tierrank
