#include "tierrank/types.hpp"

#include "tierrank/errors.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <tuple>
#include <unordered_set>

namespace tierrank {

namespace {

bool is_lower_hex(char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); }

int parse_fixed_int(std::string_view s, std::string_view what) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ValidationError("malformed " + std::string(what) + ": '" + std::string(s) + "'");
    }
    return value;
}

}  // namespace

CandidateHash::CandidateHash(std::string hex) : hex_(std::move(hex)) {
    if (hex_.size() != 16 || !std::all_of(hex_.begin(), hex_.end(), is_lower_hex)) {
        throw ValidationError("candidate hash must be 16 lowercase hex characters, got '" + hex_ + "'");
    }
}

std::string_view to_string(Role r) noexcept {
    return r == Role::Client ? "Client" : "Counsellor";
}

std::string_view to_string(QualityBucket b) noexcept {
    switch (b) {
        case QualityBucket::Good: return "Good";
        case QualityBucket::Fair: return "Fair";
        case QualityBucket::Poor: return "Poor";
    }
    return "Poor";
}

std::string_view to_string(AssessorKind k) noexcept {
    return k == AssessorKind::Human ? "Human" : "AI";
}

Role parse_role(std::string_view s) {
    if (s == "Client") return Role::Client;
    if (s == "Counsellor") return Role::Counsellor;
    throw ValidationError("unknown role '" + std::string(s) + "'");
}

QualityBucket parse_bucket(std::string_view s) {
    if (s == "Good") return QualityBucket::Good;
    if (s == "Fair") return QualityBucket::Fair;
    if (s == "Poor") return QualityBucket::Poor;
    throw ValidationError("unknown bucket '" + std::string(s) + "'");
}

AssessorKind parse_assessor_kind(std::string_view s) {
    if (s == "Human") return AssessorKind::Human;
    if (s == "AI") return AssessorKind::AI;
    throw ValidationError("unknown assessor kind '" + std::string(s) + "'");
}

std::string format_date(const CalendarDate& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

CalendarDate parse_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
        throw ValidationError("date must be YYYY-MM-DD, got '" + std::string(s) + "'");
    }
    CalendarDate d{parse_fixed_int(s.substr(0, 4), "year"), parse_fixed_int(s.substr(5, 2), "month"),
                   parse_fixed_int(s.substr(8, 2), "day")};
    const std::chrono::year_month_day ymd{std::chrono::year{d.year}, std::chrono::month{static_cast<unsigned>(d.month)},
                                          std::chrono::day{static_cast<unsigned>(d.day)}};
    if (d.month < 1 || d.day < 1 || !ymd.ok()) {
        throw ValidationError("date out of range: '" + std::string(s) + "'");
    }
    return d;
}

std::string format_time(const TimeOfDay& t) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d:%02d", t.hour, t.minute);
    return buf;
}

TimeOfDay parse_time(std::string_view s) {
    if (s.size() != 5 || s[2] != ':') {
        throw ValidationError("time must be HH:MM, got '" + std::string(s) + "'");
    }
    TimeOfDay t{parse_fixed_int(s.substr(0, 2), "hour"), parse_fixed_int(s.substr(3, 2), "minute")};
    if (t.hour < 0 || t.hour > 23 || t.minute < 0 || t.minute > 59) {
        throw ValidationError("time out of range: '" + std::string(s) + "'");
    }
    return t;
}

void check_thread(const EmailThread& thread) {
    if (thread.threadId.empty()) throw ValidationError("thread id is empty");
    if (thread.messages.empty()) throw ValidationError("thread '" + thread.threadId + "' has no messages");
    if (thread.messages.front().role != Role::Client) {
        throw ValidationError("thread '" + thread.threadId + "' must open with a client message");
    }
    for (std::size_t i = 0; i < thread.messages.size(); ++i) {
        const auto& m = thread.messages[i];
        if (m.content.empty()) {
            throw ValidationError("thread '" + thread.threadId + "' message " + std::to_string(i) + " is empty");
        }
        if (i > 0) {
            const auto& prev = thread.messages[i - 1];
            if (std::tie(m.date, m.time) < std::tie(prev.date, prev.time)) {
                throw ValidationError("thread '" + thread.threadId + "' messages are not chronological at index " +
                                      std::to_string(i));
            }
        }
    }
}

const EmailThread* StudyDataset::find_thread(std::string_view id) const {
    auto it = std::find_if(threads.begin(), threads.end(), [&](const auto& t) { return t.threadId == id; });
    return it == threads.end() ? nullptr : &*it;
}

const SubjectCandidate* StudyDataset::find_candidate(const CandidateHash& h) const {
    auto it = std::find_if(candidates.begin(), candidates.end(), [&](const auto& c) { return c.candidateHash == h; });
    return it == candidates.end() ? nullptr : &*it;
}

const AssessorProfile* StudyDataset::find_assessor(std::string_view id) const {
    auto it = std::find_if(assessors.begin(), assessors.end(), [&](const auto& a) { return a.assessorId == id; });
    return it == assessors.end() ? nullptr : &*it;
}

std::vector<const SubjectCandidate*> StudyDataset::candidates_for(std::string_view threadId) const {
    std::vector<const SubjectCandidate*> out;
    for (const auto& c : candidates) {
        if (c.threadId == threadId) out.push_back(&c);
    }
    return out;
}

void StudyDataset::check_references() const {
    std::vector<std::string> problems;
    std::unordered_set<std::string> threadIds, assessorIds;
    std::unordered_set<CandidateHash> hashes;
    for (const auto& t : threads) threadIds.insert(t.threadId);
    for (const auto& a : assessors) {
        if (!assessorIds.insert(a.assessorId).second) problems.push_back("duplicate assessor " + a.assessorId);
    }
    for (const auto& c : candidates) {
        if (!threadIds.count(c.threadId)) problems.push_back("candidate " + c.candidateHash.str() + " references unknown thread " + c.threadId);
        if (!hashes.insert(c.candidateHash).second) problems.push_back("duplicate candidate " + c.candidateHash.str());
    }
    for (const auto& a : assessments) {
        if (!assessorIds.count(a.assessorId)) problems.push_back("assessment references unknown assessor " + a.assessorId);
        if (!threadIds.count(a.threadId)) problems.push_back("assessment references unknown thread " + a.threadId);
        const auto* c = find_candidate(a.candidateHash);
        if (c == nullptr) {
            problems.push_back("assessment references unknown candidate " + a.candidateHash.str());
        } else if (c->threadId != a.threadId) {
            problems.push_back("assessment of " + a.candidateHash.str() + " filed under thread " + a.threadId);
        }
    }
    if (!problems.empty()) throw ValidationError("dataset has dangling references", std::move(problems));
}

}  // namespace tierrank
