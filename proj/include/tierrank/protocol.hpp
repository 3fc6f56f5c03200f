#pragma once

// Blinded identifiers and the categorise-then-rank protocol rules.

#include "tierrank/types.hpp"

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tierrank {

/// First 16 hex chars of SHA-256 over "threadId\x1F generatorModel \x1F subjectText"
/// (unit separator, no spaces, no trimming). Throws ValidationError on an empty
/// component.
CandidateHash derive_hash(std::string_view threadId, std::string_view generatorModel,
                          std::string_view subjectText);

/// Full lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

inline constexpr int kMaxSubjectWords = 6;

enum class TextViolation { Empty, WordLimit, QuotationMark, ForbiddenPrefix };

std::string_view to_string(TextViolation v) noexcept;

struct TextVerdict {
    std::vector<TextViolation> violations;
    int wordCount = 0;

    bool ok() const noexcept { return violations.empty(); }
    bool has(TextViolation v) const;
    /// Human-readable reasons, one per violation.
    std::vector<std::string> reasons() const;
};

/// Whitespace-delimited word count after trimming; hyphenated compounds count once.
int count_words(std::string_view text);

TextVerdict validate_candidate_text(std::string_view subjectText);

enum class RankingViolationKind {
    MixedGroup,
    DuplicateRanking,
    MissingCandidate,
    UnexpectedCandidate,
    RankNotPermutation,
    BucketSequencing,
};

std::string_view to_string(RankingViolationKind k) noexcept;

struct RankingViolation {
    RankingViolationKind kind;
    std::string detail;
};

struct RankingVerdict {
    std::vector<RankingViolation> violations;

    bool ok() const noexcept { return violations.empty(); }
    bool has(RankingViolationKind k) const;
    std::vector<std::string> diagnostics() const;
};

/// Checks one (assessor, thread) group: each expected hash ranked exactly once,
/// ranks a permutation of 1..K, buckets non-increasing along ascending rank.
RankingVerdict validate_ranking(std::span<const Assessment> group,
                                const std::set<CandidateHash>& expectedHashes);

/// Categorise-then-rank result: within-bucket orders, best first.
struct BucketedOrder {
    std::vector<CandidateHash> good;
    std::vector<CandidateHash> fair;
    std::vector<CandidateHash> poor;

    const std::vector<CandidateHash>& of(QualityBucket b) const;
    std::vector<CandidateHash>& of(QualityBucket b);

    friend bool operator==(const BucketedOrder&, const BucketedOrder&) = default;
};

struct RankedCandidate {
    CandidateHash candidateHash;
    int globalRank = 1;
    QualityBucket bucket = QualityBucket::Poor;

    friend bool operator==(const RankedCandidate&, const RankedCandidate&) = default;
};

/// Concatenates Good, Fair and Poor orders into global ranks 1..K. Throws
/// ValidationError (with diagnostics) when a hash appears twice or, when
/// `expected` is non-empty, when the lists do not cover it exactly.
std::vector<RankedCandidate> merge_bucket_rankings(const BucketedOrder& categorised,
                                                   const std::set<CandidateHash>& expected = {});

/// Inverse of merge_bucket_rankings.
BucketedOrder split_by_bucket(std::span<const RankedCandidate> ranked);

std::vector<Assessment> to_assessments(std::span<const RankedCandidate> ranked, const AssessorId& assessor,
                                       const ThreadId& thread);

/// Deterministic permutation of `items` for one (assessor, thread) pair,
/// derived from the study seed. Stable across runs and platforms.
std::vector<CandidateHash> seeded_permutation(std::uint64_t studySeed, std::string_view assessorId,
                                              std::string_view threadId, std::vector<CandidateHash> items);

/// One line per message: "{Role} wrote on {YYYY-MM-DD} at {HH:MM}: '{content}' ###".
/// Throws ValidationError on an invalid thread.
std::string format_thread_for_prompt(const EmailThread& thread);

}  // namespace tierrank
