#include "tierrank/protocol.hpp"

#include "tierrank/errors.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <random>
#include <sstream>

namespace tierrank {

namespace {

constexpr char kUnitSeparator = '\x1F';

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

// ASCII quotes plus the German/English typographic double quotes (UTF-8).
constexpr std::array<std::string_view, 5> kQuotationMarks = {"\"", "'", "\xE2\x80\x9E", "\xE2\x80\x9C", "\xE2\x80\x9D"};

constexpr std::array<std::string_view, 2> kForbiddenPrefixes = {"subject:", "betreff:"};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0x0F]);
    }
    return out;
}

CandidateHash derive_hash(std::string_view threadId, std::string_view generatorModel, std::string_view subjectText) {
    if (threadId.empty() || generatorModel.empty() || subjectText.empty()) {
        throw ValidationError("derive_hash requires non-empty thread id, model and subject text");
    }
    std::string canonical;
    canonical.reserve(threadId.size() + generatorModel.size() + subjectText.size() + 2);
    canonical.append(threadId).push_back(kUnitSeparator);
    canonical.append(generatorModel).push_back(kUnitSeparator);
    canonical.append(subjectText);
    return CandidateHash(sha256_hex(canonical).substr(0, 16));
}

std::string_view to_string(TextViolation v) noexcept {
    switch (v) {
        case TextViolation::Empty: return "empty";
        case TextViolation::WordLimit: return "word-limit";
        case TextViolation::QuotationMark: return "quotation-mark";
        case TextViolation::ForbiddenPrefix: return "forbidden-prefix";
    }
    return "unknown";
}

bool TextVerdict::has(TextViolation v) const {
    return std::find(violations.begin(), violations.end(), v) != violations.end();
}

std::vector<std::string> TextVerdict::reasons() const {
    std::vector<std::string> out;
    for (auto v : violations) {
        std::string r(to_string(v));
        if (v == TextViolation::WordLimit) {
            r += ": " + std::to_string(wordCount) + " words exceeds " + std::to_string(kMaxSubjectWords);
        }
        out.push_back(std::move(r));
    }
    return out;
}

int count_words(std::string_view text) {
    text = trim(text);
    int words = 0;
    bool inWord = false;
    for (char c : text) {
        if (is_space(c)) {
            inWord = false;
        } else if (!inWord) {
            inWord = true;
            ++words;
        }
    }
    return words;
}

TextVerdict validate_candidate_text(std::string_view subjectText) {
    TextVerdict verdict;
    const auto trimmed = trim(subjectText);
    verdict.wordCount = count_words(trimmed);
    if (trimmed.empty()) {
        verdict.violations.push_back(TextViolation::Empty);
        return verdict;
    }
    if (verdict.wordCount > kMaxSubjectWords) verdict.violations.push_back(TextViolation::WordLimit);
    if (std::any_of(kQuotationMarks.begin(), kQuotationMarks.end(),
                    [&](std::string_view q) { return subjectText.find(q) != std::string_view::npos; })) {
        verdict.violations.push_back(TextViolation::QuotationMark);
    }
    if (std::any_of(kForbiddenPrefixes.begin(), kForbiddenPrefixes.end(),
                    [&](std::string_view p) { return starts_with_ci(trimmed, p); })) {
        verdict.violations.push_back(TextViolation::ForbiddenPrefix);
    }
    return verdict;
}

std::string_view to_string(RankingViolationKind k) noexcept {
    switch (k) {
        case RankingViolationKind::MixedGroup: return "mixed-group";
        case RankingViolationKind::DuplicateRanking: return "duplicate-ranking";
        case RankingViolationKind::MissingCandidate: return "missing-candidate";
        case RankingViolationKind::UnexpectedCandidate: return "unexpected-candidate";
        case RankingViolationKind::RankNotPermutation: return "rank-not-permutation";
        case RankingViolationKind::BucketSequencing: return "bucket-sequencing";
    }
    return "unknown";
}

bool RankingVerdict::has(RankingViolationKind k) const {
    return std::any_of(violations.begin(), violations.end(), [k](const auto& v) { return v.kind == k; });
}

std::vector<std::string> RankingVerdict::diagnostics() const {
    std::vector<std::string> out;
    out.reserve(violations.size());
    for (const auto& v : violations) out.push_back(std::string(to_string(v.kind)) + ": " + v.detail);
    return out;
}

RankingVerdict validate_ranking(std::span<const Assessment> group, const std::set<CandidateHash>& expectedHashes) {
    RankingVerdict verdict;
    auto add = [&](RankingViolationKind k, std::string detail) { verdict.violations.push_back({k, std::move(detail)}); };

    if (group.empty()) {
        add(RankingViolationKind::MissingCandidate, "empty group; every subject line must be ranked exactly once");
        return verdict;
    }

    for (const auto& a : group) {
        if (a.assessorId != group.front().assessorId || a.threadId != group.front().threadId) {
            add(RankingViolationKind::MixedGroup, "group mixes assessor/thread pairs");
            break;
        }
    }

    std::map<CandidateHash, int> seen;
    for (const auto& a : group) ++seen[a.candidateHash];
    for (const auto& [hash, count] : seen) {
        if (count > 1) {
            add(RankingViolationKind::DuplicateRanking,
                hash.str() + " ranked " + std::to_string(count) + " times; each subject line must be ranked exactly once");
        }
        if (!expectedHashes.count(hash)) add(RankingViolationKind::UnexpectedCandidate, hash.str() + " is not a candidate of this thread");
    }
    for (const auto& hash : expectedHashes) {
        if (!seen.count(hash)) add(RankingViolationKind::MissingCandidate, hash.str() + " not ranked; each subject line must be ranked exactly once");
    }

    const int k = static_cast<int>(group.size());
    std::vector<int> rankUses(static_cast<std::size_t>(k) + 1, 0);
    bool permutation = true;
    for (const auto& a : group) {
        if (a.globalRank < 1 || a.globalRank > k) {
            permutation = false;
            add(RankingViolationKind::RankNotPermutation,
                "rank " + std::to_string(a.globalRank) + " outside 1.." + std::to_string(k));
        } else if (++rankUses[static_cast<std::size_t>(a.globalRank)] == 2) {
            permutation = false;
            add(RankingViolationKind::RankNotPermutation, "rank " + std::to_string(a.globalRank) + " assigned twice");
        }
    }

    if (permutation) {
        std::vector<const Assessment*> byRank(static_cast<std::size_t>(k));
        for (const auto& a : group) byRank[static_cast<std::size_t>(a.globalRank - 1)] = &a;
        for (std::size_t i = 1; i < byRank.size(); ++i) {
            const auto prev = byRank[i - 1]->bucket;
            const auto cur = byRank[i]->bucket;
            if (ordinal(cur) > ordinal(prev)) {
                // Entering Poor closes Fair (and Good); entering Fair closes Good.
                const std::string closed =
                    prev == QualityBucket::Poor ? "the 'Fair' bucket closes" : "the 'Good' bucket closes";
                add(RankingViolationKind::BucketSequencing,
                    std::string(to_string(cur)) + " at rank " + std::to_string(i + 1) + " after " +
                        std::string(to_string(prev)) + " at rank " + std::to_string(i) + " (" + closed + ")");
            }
        }
    }
    return verdict;
}

const std::vector<CandidateHash>& BucketedOrder::of(QualityBucket b) const {
    switch (b) {
        case QualityBucket::Good: return good;
        case QualityBucket::Fair: return fair;
        case QualityBucket::Poor: return poor;
    }
    return poor;
}

std::vector<CandidateHash>& BucketedOrder::of(QualityBucket b) {
    return const_cast<std::vector<CandidateHash>&>(std::as_const(*this).of(b));
}

std::vector<RankedCandidate> merge_bucket_rankings(const BucketedOrder& categorised,
                                                   const std::set<CandidateHash>& expected) {
    std::vector<std::string> problems;
    std::vector<RankedCandidate> out;
    std::map<CandidateHash, QualityBucket> placed;
    int rank = 0;
    for (auto bucket : {QualityBucket::Good, QualityBucket::Fair, QualityBucket::Poor}) {
        for (const auto& hash : categorised.of(bucket)) {
            auto [it, inserted] = placed.emplace(hash, bucket);
            if (!inserted) {
                problems.push_back("overlap: " + hash.str() + " placed in both " + std::string(to_string(it->second)) +
                                   " and " + std::string(to_string(bucket)));
                continue;
            }
            out.push_back({hash, ++rank, bucket});
        }
    }
    if (!expected.empty()) {
        for (const auto& hash : expected) {
            if (!placed.count(hash)) problems.push_back("missing: " + hash.str() + " not placed in any bucket");
        }
        for (const auto& [hash, bucket] : placed) {
            if (!expected.count(hash)) problems.push_back("unexpected: " + hash.str() + " is not a candidate of this thread");
        }
    }
    if (!problems.empty()) throw ValidationError("bucket lists do not partition the candidate set", std::move(problems));
    return out;
}

BucketedOrder split_by_bucket(std::span<const RankedCandidate> ranked) {
    std::vector<RankedCandidate> sorted(ranked.begin(), ranked.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.globalRank < b.globalRank; });
    BucketedOrder out;
    for (const auto& r : sorted) out.of(r.bucket).push_back(r.candidateHash);
    return out;
}

std::vector<Assessment> to_assessments(std::span<const RankedCandidate> ranked, const AssessorId& assessor,
                                       const ThreadId& thread) {
    std::vector<Assessment> out;
    out.reserve(ranked.size());
    for (const auto& r : ranked) out.push_back({assessor, thread, r.candidateHash, r.bucket, r.globalRank});
    return out;
}

std::vector<CandidateHash> seeded_permutation(std::uint64_t studySeed, std::string_view assessorId,
                                              std::string_view threadId, std::vector<CandidateHash> items) {
    std::string key = std::to_string(studySeed);
    key.push_back(kUnitSeparator);
    key.append(assessorId).push_back(kUnitSeparator);
    key.append(threadId);
    const auto digest = sha256_hex(key);
    const std::uint64_t seed = std::stoull(digest.substr(0, 16), nullptr, 16);

    // mt19937_64 output is fixed by the standard; distributions are not, so
    // draw indices by rejection sampling instead of uniform_int_distribution.
    std::mt19937_64 rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::uint64_t bound = i;
        const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % bound;
        std::uint64_t draw;
        do {
            draw = rng();
        } while (draw >= limit);
        std::swap(items[i - 1], items[static_cast<std::size_t>(draw % bound)]);
    }
    return items;
}

std::string format_thread_for_prompt(const EmailThread& thread) {
    check_thread(thread);
    std::ostringstream os;
    for (std::size_t i = 0; i < thread.messages.size(); ++i) {
        const auto& m = thread.messages[i];
        if (i > 0) os << '\n';
        os << to_string(m.role) << " wrote on " << format_date(m.date) << " at " << format_time(m.time) << ": '"
           << m.content << "' ###";
    }
    return os.str();
}

}  // namespace tierrank
