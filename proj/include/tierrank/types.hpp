#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tierrank {

using ThreadId = std::string;
using AssessorId = std::string;
using ModelLabel = std::string;

/// 16 lowercase hex characters identifying one candidate within a study.
class CandidateHash {
public:
    CandidateHash() = default;
    /// Throws ValidationError unless `hex` is exactly 16 lowercase hex digits.
    explicit CandidateHash(std::string hex);

    const std::string& str() const noexcept { return hex_; }
    bool empty() const noexcept { return hex_.empty(); }

    friend auto operator<=>(const CandidateHash&, const CandidateHash&) = default;
    friend bool operator==(const CandidateHash&, const CandidateHash&) = default;

private:
    std::string hex_;
};

enum class Role { Client, Counsellor };

/// Ordinal codes are fixed: they feed directly into the reliability metrics.
enum class QualityBucket : int { Poor = 1, Fair = 2, Good = 3 };

enum class AssessorKind { Human, AI };

inline constexpr int ordinal(QualityBucket b) noexcept { return static_cast<int>(b); }

std::string_view to_string(Role r) noexcept;
std::string_view to_string(QualityBucket b) noexcept;
std::string_view to_string(AssessorKind k) noexcept;

Role parse_role(std::string_view s);
QualityBucket parse_bucket(std::string_view s);
AssessorKind parse_assessor_kind(std::string_view s);

struct CalendarDate {
    int year = 1970;
    int month = 1;
    int day = 1;

    friend auto operator<=>(const CalendarDate&, const CalendarDate&) = default;
};

struct TimeOfDay {
    int hour = 0;
    int minute = 0;

    friend auto operator<=>(const TimeOfDay&, const TimeOfDay&) = default;
};

/// "YYYY-MM-DD"
std::string format_date(const CalendarDate& d);
CalendarDate parse_date(std::string_view s);
/// "HH:MM"
std::string format_time(const TimeOfDay& t);
TimeOfDay parse_time(std::string_view s);

struct Message {
    Role role = Role::Client;
    CalendarDate date;
    TimeOfDay time;
    std::string content;
};

struct EmailThread {
    ThreadId threadId;
    std::vector<Message> messages;
};

/// Throws ValidationError if the thread is empty, out of chronological order,
/// does not open with a client message, or has an empty message.
void check_thread(const EmailThread& thread);

struct SubjectCandidate {
    CandidateHash candidateHash;
    ThreadId threadId;
    ModelLabel generatorModel;
    std::string subjectText;
};

struct AssessorProfile {
    AssessorId assessorId;
    AssessorKind kind = AssessorKind::Human;
    std::string label;
};

struct Assessment {
    AssessorId assessorId;
    ThreadId threadId;
    CandidateHash candidateHash;
    QualityBucket bucket = QualityBucket::Poor;
    int globalRank = 1;

    friend bool operator==(const Assessment&, const Assessment&) = default;
};

struct StudyDataset {
    std::vector<EmailThread> threads;
    std::vector<SubjectCandidate> candidates;
    std::vector<AssessorProfile> assessors;
    std::vector<Assessment> assessments;

    const EmailThread* find_thread(std::string_view id) const;
    const SubjectCandidate* find_candidate(const CandidateHash& h) const;
    const AssessorProfile* find_assessor(std::string_view id) const;

    /// Candidates of one thread in dataset order.
    std::vector<const SubjectCandidate*> candidates_for(std::string_view threadId) const;

    /// |assessors| x |candidates|.
    std::size_t expected_assessment_count() const noexcept {
        return assessors.size() * candidates.size();
    }
    bool complete() const noexcept { return assessments.size() == expected_assessment_count(); }

    /// Throws ValidationError listing every dangling reference.
    void check_references() const;
};

}  // namespace tierrank

template <>
struct std::hash<tierrank::CandidateHash> {
    std::size_t operator()(const tierrank::CandidateHash& h) const noexcept {
        return std::hash<std::string>{}(h.str());
    }
};
