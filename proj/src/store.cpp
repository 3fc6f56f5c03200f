#include "tierrank/store.hpp"

#include "tierrank/errors.hpp"
#include "tierrank/json_io.hpp"
#include "tierrank/protocol.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

namespace tierrank {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kConfigFile = "config";
constexpr const char* kLogFile = "events.log";
constexpr const char* kTokensFile = "tokens.json";
constexpr const char* kReportsDir = "reports";

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw StorageError("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file_atomic(const fs::path& p, const std::string& content) {
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StorageError("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw StorageError("cannot write " + tmp.string());
    }
    fs::rename(tmp, p);
}

std::string random_token() {
    std::random_device rd;
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (int i = 0; i < 32; ++i) out.push_back(kHex[rd() & 0x0F]);
    return out;
}

void apply_threads(StudyState& s, const std::vector<EmailThread>& threads) {
    std::set<std::string> fresh;
    for (const auto& t : threads) {
        check_thread(t);
        if (s.dataset.find_thread(t.threadId) || !fresh.insert(t.threadId).second) {
            throw ValidationError("duplicate thread " + t.threadId);
        }
    }
    s.dataset.threads.insert(s.dataset.threads.end(), threads.begin(), threads.end());
}

void apply_candidates(StudyState& s, const StudyConfig& config, const std::vector<SubjectCandidate>& candidates) {
    std::set<CandidateHash> fresh;
    std::set<std::pair<std::string, std::string>> cells;
    std::map<std::string, int> perThread;
    for (const auto& c : s.dataset.candidates) {
        cells.insert({c.threadId, c.generatorModel});
        ++perThread[c.threadId];
    }
    for (const auto& c : candidates) {
        if (!s.dataset.find_thread(c.threadId)) throw ValidationError("candidate references unknown thread " + c.threadId);
        if (derive_hash(c.threadId, c.generatorModel, c.subjectText) != c.candidateHash) {
            throw ValidationError("candidate hash " + c.candidateHash.str() + " does not match its content");
        }
        if (s.dataset.find_candidate(c.candidateHash) || !fresh.insert(c.candidateHash).second) {
            throw ValidationError("duplicate candidate hash " + c.candidateHash.str());
        }
        if (!cells.insert({c.threadId, c.generatorModel}).second) {
            throw ValidationError("thread " + c.threadId + " already has a candidate from " + c.generatorModel);
        }
        if (++perThread[c.threadId] > config.candidatesPerThread) {
            throw ValidationError("thread " + c.threadId + " would exceed " + std::to_string(config.candidatesPerThread) +
                                  " candidates");
        }
        if (const auto verdict = validate_candidate_text(c.subjectText); !verdict.ok()) {
            throw ValidationError("candidate " + c.candidateHash.str() + " violates subject rules", verdict.reasons());
        }
    }
    s.dataset.candidates.insert(s.dataset.candidates.end(), candidates.begin(), candidates.end());
}

void apply_assessments(StudyState& s, const StudyConfig& config, const std::vector<Assessment>& group,
                       const std::optional<SubmissionRecord>& submission) {
    if (group.empty()) throw ValidationError("empty assessment group");
    const auto& assessor = group.front().assessorId;
    const auto& thread = group.front().threadId;
    if (!s.dataset.find_assessor(assessor)) throw ValidationError("unknown assessor " + assessor);
    if (!s.dataset.find_thread(thread)) throw ValidationError("unknown thread " + thread);
    if (s.submitted(assessor, thread)) throw ValidationError("assessor " + assessor + " already assessed thread " + thread);

    std::set<CandidateHash> expected;
    for (const auto* c : s.dataset.candidates_for(thread)) expected.insert(c->candidateHash);
    if (static_cast<int>(expected.size()) != config.candidatesPerThread) {
        throw ValidationError("thread " + thread + " has " + std::to_string(expected.size()) + " of " +
                              std::to_string(config.candidatesPerThread) + " candidates");
    }
    if (const auto verdict = validate_ranking(group, expected); !verdict.ok()) {
        throw ValidationError("assessment group violates the ranking protocol", verdict.diagnostics());
    }
    s.dataset.assessments.insert(s.dataset.assessments.end(), group.begin(), group.end());
    s.submissions[{assessor, thread}] = submission.value_or(SubmissionRecord{});
}

void apply_session(StudyState& s, const SessionRecord& r) {
    if (!s.dataset.find_assessor(r.assessorId)) throw ValidationError("unknown assessor " + r.assessorId);
    if (!s.dataset.find_thread(r.threadId)) throw ValidationError("unknown thread " + r.threadId);
    s.sessions.emplace(r.sessionId, r);
}

json session_json(const SessionRecord& r) {
    return json{{"sessionId", r.sessionId}, {"assessorId", r.assessorId}, {"threadId", r.threadId}};
}

void apply_event(StudyState& s, const StudyConfig& config, const json& event) {
    const auto type = event.at("type").get<std::string>();
    if (type == "threads") {
        apply_threads(s, event.at("threads").get<std::vector<EmailThread>>());
    } else if (type == "candidates") {
        apply_candidates(s, config, event.at("candidates").get<std::vector<SubjectCandidate>>());
    } else if (type == "assessments") {
        std::optional<SubmissionRecord> submission;
        if (event.contains("sessionId")) {
            submission = SubmissionRecord{event.at("sessionId").get<std::string>(), event.value("submittedAt", "")};
        }
        apply_assessments(s, config, event.at("assessments").get<std::vector<Assessment>>(), submission);
    } else if (type == "session") {
        apply_session(s, {event.at("sessionId").get<std::string>(), event.at("assessorId").get<std::string>(),
                          event.at("threadId").get<std::string>()});
    } else {
        throw ValidationError("unknown event type '" + type + "'");
    }
}

StudyState initial_state(const StudyConfig& config) {
    StudyState s;
    s.dataset.assessors = config.assessors;
    return s;
}

/// Replays committed lines; returns the byte length of the committed prefix.
std::size_t replay(const fs::path& logPath, const StudyConfig& config, StudyState& state) {
    const auto content = read_file(logPath);
    std::size_t pos = 0;
    std::size_t lineNo = 0;
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        if (nl == std::string::npos) break;  // interrupted append
        ++lineNo;
        const std::string_view line(content.data() + pos, nl - pos);
        if (!line.empty()) {
            try {
                apply_event(state, config, json::parse(line));
            } catch (const std::exception& e) {
                throw StorageError(logPath.string() + " line " + std::to_string(lineNo) + ": " + e.what());
            }
        }
        pos = nl + 1;
    }
    return pos;
}

}  // namespace

struct StudyStore::Impl {
    fs::path dir;
    StudyConfig config;
    std::map<AssessorId, std::string> tokens;
    int fd = -1;

    std::mutex writeMutex;
    mutable std::mutex snapshotMutex;
    std::shared_ptr<const StudyState> state;

    ~Impl() {
        if (fd >= 0) ::close(fd);
    }

    std::shared_ptr<const StudyState> current() const {
        std::lock_guard lock(snapshotMutex);
        return state;
    }

    template <typename Apply>
    void commit(const json& event, Apply&& apply) {
        std::lock_guard lock(writeMutex);
        auto next = std::make_shared<StudyState>(*current());
        apply(*next);
        const std::string line = event.dump() + "\n";
        std::size_t written = 0;
        while (written < line.size()) {
            const auto n = ::write(fd, line.data() + written, line.size() - written);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw StorageError(std::string("append failed: ") + std::strerror(errno));
            }
            written += static_cast<std::size_t>(n);
        }
        if (::fsync(fd) != 0) throw StorageError(std::string("fsync failed: ") + std::strerror(errno));
        std::lock_guard snap(snapshotMutex);
        state = std::move(next);
    }
};

StudyStore::StudyStore(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
StudyStore::StudyStore(StudyStore&&) noexcept = default;
StudyStore& StudyStore::operator=(StudyStore&&) noexcept = default;
StudyStore::~StudyStore() = default;

StudyConfig load_config(const fs::path& studyDir) {
    try {
        auto config = json::parse(read_file(studyDir / kConfigFile)).get<StudyConfig>();
        config.check();
        return config;
    } catch (const json::exception& e) {
        throw StorageError((studyDir / kConfigFile).string() + ": " + e.what());
    }
}

StudyStore StudyStore::create(const fs::path& root, StudyConfig config) {
    if (config.storageRoot.empty()) config.storageRoot = root.string();
    config.check();
    const fs::path dir = root / config.studyId;
    if (fs::exists(dir / kConfigFile)) throw StorageError("study already exists at " + dir.string());
    fs::create_directories(dir / kReportsDir);

    json tokens = json::object();
    for (const auto& a : config.assessors) {
        if (a.kind == AssessorKind::Human) tokens[a.assessorId] = random_token();
    }
    write_file_atomic(dir / kTokensFile, tokens.dump(2) + "\n");
    { std::ofstream(dir / kLogFile, std::ios::app); }
    write_file_atomic(dir / kConfigFile, json(config).dump(2) + "\n");
    return open(dir);
}

StudyStore StudyStore::open(const fs::path& studyDir) {
    if (!fs::exists(studyDir / kConfigFile)) throw StorageError("no study at " + studyDir.string());
    auto impl = std::make_unique<Impl>();
    impl->dir = studyDir;
    impl->config = load_config(studyDir);
    if (fs::exists(studyDir / kTokensFile)) {
        impl->tokens = json::parse(read_file(studyDir / kTokensFile)).get<std::map<AssessorId, std::string>>();
    }
    fs::create_directories(studyDir / kReportsDir);

    const fs::path logPath = studyDir / kLogFile;
    if (!fs::exists(logPath)) { std::ofstream(logPath, std::ios::app); }
    auto state = initial_state(impl->config);
    const auto committed = replay(logPath, impl->config, state);
    // Drop an interrupted trailing append so the next line starts cleanly.
    if (fs::file_size(logPath) != committed) fs::resize_file(logPath, committed);
    impl->state = std::make_shared<const StudyState>(std::move(state));

    impl->fd = ::open(logPath.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
    if (impl->fd < 0) throw StorageError("cannot open " + logPath.string() + ": " + std::strerror(errno));
    return StudyStore(std::move(impl));
}

const StudyConfig& StudyStore::config() const noexcept { return impl_->config; }
const fs::path& StudyStore::dir() const noexcept { return impl_->dir; }
fs::path StudyStore::reports_dir() const { return impl_->dir / kReportsDir; }
const std::map<AssessorId, std::string>& StudyStore::tokens() const noexcept { return impl_->tokens; }
std::shared_ptr<const StudyState> StudyStore::snapshot() const { return impl_->current(); }

void StudyStore::append_threads(std::vector<EmailThread> threads) {
    const json event{{"type", "threads"}, {"threads", threads}};
    impl_->commit(event, [&](StudyState& s) { apply_threads(s, threads); });
}

void StudyStore::append_candidates(std::vector<SubjectCandidate> candidates) {
    const json event{{"type", "candidates"}, {"candidates", candidates}};
    impl_->commit(event, [&](StudyState& s) { apply_candidates(s, impl_->config, candidates); });
}

void StudyStore::append_assessments(std::vector<Assessment> group, std::optional<SubmissionRecord> submission) {
    json event{{"type", "assessments"}, {"assessments", group}};
    if (submission) {
        event["sessionId"] = submission->sessionId;
        event["submittedAt"] = submission->submittedAt;
    }
    impl_->commit(event, [&](StudyState& s) { apply_assessments(s, impl_->config, group, submission); });
}

void StudyStore::append_session(const SessionRecord& session) {
    if (impl_->current()->sessions.count(session.sessionId)) return;
    json event = session_json(session);
    event["type"] = "session";
    impl_->commit(event, [&](StudyState& s) { apply_session(s, session); });
}

StudyDataset load_dataset(const fs::path& studyDir) {
    const auto config = load_config(studyDir);
    auto state = initial_state(config);
    replay(studyDir / kLogFile, config, state);
    return std::move(state.dataset);
}

}  // namespace tierrank
