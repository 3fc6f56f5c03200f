#include "tierrank/pipeline.hpp"

#include "tierrank/errors.hpp"
#include "tierrank/json_io.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace tierrank {

using nlohmann::json;

namespace {

constexpr std::string_view kHistorySlot = "{{complete_email_history}}";

// Paragraphs are separated by blank lines; the history slot is substituted.
constexpr std::string_view kGenerationTemplate =
    "You are a specialised assistant for psychosocial online counselling.\n"
    "\n"
    "Clients often approach counselling services with vague subject lines like \"Help\" or \"Problem.\" "
    "Your role is to assist the counsellor by generating a precise and individual subject line for the "
    "client's first email. This helps the counsellor quickly grasp the main content of the request and "
    "respond efficiently, especially when managing multiple parallel cases.\n"
    "\n"
    "Carefully read the client's first email and generate a concise subject line that clearly and "
    "understandably summarises the core issue of the request. The subject should be a maximum of 6 words "
    "and should not contain unnecessary formalities, enabling the counsellor to immediately gain a clear "
    "understanding of the issue.\n"
    "\n"
    "The input consists of a complete email thread in chronological order. The email is formatted as: "
    "{Role} wrote on {Date} at {Time}: '{email Content}' ###.\n"
    "\n"
    "The desired output is a JSON object containing one field: { \"Subject\": \"Generated concise subject line\" }.\n"
    "\n"
    "The subject line should concisely summarise the core content of the client's first message and avoid "
    "unnecessary formalities. Do not use quotation marks or 'Subject:' in the generated subject.\n"
    "\n"
    "Following the formatted email history is presented: {{complete_email_history}}\n"
    "End of email history.\n"
    "\n"
    "Remember, you are a specialised assistant for psychosocial online counselling. Your task is to create "
    "concise and relevant subject lines that help the counsellor to quickly understand the client's issue.\n"
    "\n"
    "Remember, your task is to read the client's first email in the thread and generate a short, concise "
    "subject line that accurately reflects the core content of the request.";

constexpr std::string_view kJudgingHeader =
    "Role: You act as a specialised model used in psychosocial online counselling to evaluate, categorise "
    "and rank automatically subject lines.\n"
    "\n"
    "Task: Order the generated subject lines by quality and assign each suggestion to one of three buckets: "
    "'Good', 'Fair', or 'Poor'. Subject lines should be concise and individually tailored to the initial "
    "message. Each must summarise main content clearly in maximum 6 words, avoiding unnecessary "
    "formalities. Evaluation focuses on how precisely a subject line captures core content, enabling "
    "counsellors to quickly grasp the central concern.\n"
    "\n"
    "Sequential Bucket Filling:\n"
    "- A subject line may only be placed in the 'Good' bucket if no better subject line lies in the 'Fair' "
    "or 'Poor' buckets\n"
    "- Once a subject line enters 'Fair', all subsequent subject lines must be 'Fair' or 'Poor' (the 'Good' "
    "bucket closes)\n"
    "- Once a subject line enters 'Poor', all subsequent subject lines must be 'Poor' (the 'Fair' bucket "
    "closes)\n"
    "- Empty buckets are possible if quality distribution requires it\n";

constexpr std::string_view kJudgingFooter =
    "Output Format: Valid JSON object with rankings:\n"
    "{\n"
    "  \"rankings\": [\n"
    "    {\n"
    "      \"id\": \"...\",\n"
    "      \"rank\": n,\n"
    "      \"bucket\": \"Good/Fair/Poor\"\n"
    "    },\n"
    "    ...\n"
    "  ]\n"
    "}\n"
    "Rank every subject line exactly once, using ranks 1 to N with 1 the best.";

}  // namespace

std::string build_generation_prompt(const EmailThread& thread) {
    std::string prompt(kGenerationTemplate);
    prompt.replace(prompt.find(kHistorySlot), kHistorySlot.size(), format_thread_for_prompt(thread));
    return prompt;
}

std::string build_judging_prompt(const EmailThread& thread, const std::vector<PresentedCandidate>& candidates) {
    if (candidates.empty()) throw ValidationError("judging prompt needs at least one candidate");
    std::string prompt(kJudgingHeader);
    prompt += "\nEmail conversation:\n";
    prompt += format_thread_for_prompt(thread);
    prompt += "\n\nSubject lines:\n";
    for (const auto& c : candidates) prompt += "- id: " + c.candidateHash.str() + " | subject: " + c.subjectText + "\n";
    prompt += "\n";
    prompt += kJudgingFooter;
    return prompt;
}

const json& generation_schema() {
    static const json schema = {{"type", "object"},
                                {"properties", {{"Subject", {{"type", "string"}}}}},
                                {"required", {"Subject"}},
                                {"additionalProperties", false}};
    return schema;
}

const json& judging_schema() {
    static const json schema = {
        {"type", "object"},
        {"properties",
         {{"rankings",
           {{"type", "array"},
            {"items",
             {{"type", "object"},
              {"properties",
               {{"id", {{"type", "string"}}},
                {"rank", {{"type", "integer"}}},
                {"bucket", {{"type", "string"}, {"enum", {"Good", "Fair", "Poor"}}}}}},
              {"required", {"id", "rank", "bucket"}},
              {"additionalProperties", false}}}}}}},
        {"required", {"rankings"}},
        {"additionalProperties", false}};
    return schema;
}

std::string_view to_string(FailureKind k) noexcept {
    switch (k) {
        case FailureKind::Transport: return "transport";
        case FailureKind::Malformed: return "malformed";
        case FailureKind::Invalid: return "invalid";
    }
    return "unknown";
}

std::string parse_generation_response(std::string_view raw) {
    json doc;
    try {
        doc = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("response is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("Subject") || !doc["Subject"].is_string()) {
        throw ValidationError("response lacks a string \"Subject\" field");
    }
    return doc["Subject"].get<std::string>();
}

namespace {

/// Shared retry loop: `handle` returns reasons for rejection (empty = accept)
/// or throws ValidationError for malformed output.
template <typename Handle>
std::vector<AttemptRecord> attempt_loop(ChatEndpoint& endpoint, ChatRequest request, int maxAttempts, Handle&& handle) {
    if (maxAttempts < 1) throw ValidationError("maxAttempts must be >= 1");
    std::vector<AttemptRecord> attempts;
    for (int attempt = 1; attempt <= maxAttempts; ++attempt) {
        AttemptRecord record;
        record.attempt = attempt;
        request.context.attempt = attempt;
        try {
            record.raw = endpoint.complete(request);
        } catch (const TransportError& e) {
            record.failure = FailureKind::Transport;
            record.reasons.push_back(e.what());
            attempts.push_back(std::move(record));
            continue;
        }
        try {
            auto reasons = handle(record.raw);
            if (reasons.empty()) {
                record.accepted = true;
                attempts.push_back(std::move(record));
                break;
            }
            record.failure = FailureKind::Invalid;
            record.reasons = std::move(reasons);
        } catch (const ValidationError& e) {
            record.failure = FailureKind::Malformed;
            record.reasons.push_back(e.what());
        }
        attempts.push_back(std::move(record));
    }
    return attempts;
}

}  // namespace

GenerationResult generate_subject(ChatEndpoint& endpoint, const EmailThread& thread, int maxAttempts,
                                  DecodingSettings decoding) {
    GenerationResult result;
    result.threadId = thread.threadId;
    result.model = endpoint.label();

    ChatRequest request;
    request.messages.push_back({"user", build_generation_prompt(thread)});
    request.temperature = decoding.temperature;
    request.maxTokens = decoding.maxTokens;
    request.responseSchema = generation_schema();
    request.context.task = TaskKind::Generation;
    request.context.threadId = thread.threadId;

    std::string subject;
    result.attempts = attempt_loop(endpoint, std::move(request), maxAttempts, [&](const std::string& raw) {
        subject = parse_generation_response(raw);
        return validate_candidate_text(subject).reasons();
    });
    if (!result.attempts.empty() && result.attempts.back().accepted) {
        result.candidate = SubjectCandidate{derive_hash(thread.threadId, endpoint.label(), subject), thread.threadId,
                                            endpoint.label(), subject};
    }
    return result;
}

std::vector<RankedCandidate> parse_judging_response(std::string_view raw) {
    json doc;
    try {
        doc = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("response is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("rankings") || !doc["rankings"].is_array()) {
        throw ValidationError("response lacks a \"rankings\" array");
    }
    std::vector<RankedCandidate> out;
    for (const auto& entry : doc["rankings"]) {
        if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_string() || !entry.contains("rank") ||
            !entry["rank"].is_number_integer() || !entry.contains("bucket") || !entry["bucket"].is_string()) {
            throw ValidationError("ranking entry must have string id, integer rank and string bucket");
        }
        RankedCandidate r;
        r.candidateHash = CandidateHash(entry["id"].get<std::string>());
        r.globalRank = entry["rank"].get<int>();
        r.bucket = parse_bucket(entry["bucket"].get<std::string>());
        out.push_back(std::move(r));
    }
    return out;
}

JudgingResult judge_thread(ChatEndpoint& endpoint, const AssessorId& assessorId, const EmailThread& thread,
                           std::vector<PresentedCandidate> presented, int maxAttempts, DecodingSettings decoding) {
    JudgingResult result;
    result.threadId = thread.threadId;
    result.assessorId = assessorId;

    // Step 1: hash-paired candidates.
    std::set<CandidateHash> expected;
    for (const auto& c : presented) {
        if (c.candidateHash.empty()) throw ValidationError("presented candidate lacks a hash");
        expected.insert(c.candidateHash);
    }
    result.presented = std::move(presented);

    // Step 2: prompt.
    ChatRequest request;
    request.messages.push_back({"user", build_judging_prompt(thread, result.presented)});
    request.temperature = decoding.temperature;
    request.maxTokens = decoding.maxTokens;
    request.responseSchema = judging_schema();
    request.context.task = TaskKind::Judging;
    request.context.threadId = thread.threadId;
    for (const auto& c : result.presented) request.context.candidateIds.push_back(c.candidateHash);

    // Steps 3 and 4: structured rankings, validated, re-requested on failure.
    std::vector<Assessment> accepted;
    result.attempts = attempt_loop(endpoint, std::move(request), maxAttempts, [&](const std::string& raw) {
        const auto ranked = parse_judging_response(raw);
        accepted = to_assessments(ranked, assessorId, thread.threadId);
        return validate_ranking(accepted, expected).diagnostics();
    });
    if (!result.attempts.empty() && result.attempts.back().accepted) {
        std::sort(accepted.begin(), accepted.end(), [](const auto& a, const auto& b) { return a.globalRank < b.globalRank; });
        result.assessments = std::move(accepted);
    }
    return result;
}

std::vector<PresentedCandidate> presentation_for(const StudyDataset& dataset, std::uint64_t seed,
                                                 const AssessorId& assessorId, const ThreadId& threadId) {
    std::vector<CandidateHash> hashes;
    std::map<CandidateHash, const SubjectCandidate*> byHash;
    for (const auto* c : dataset.candidates_for(threadId)) {
        hashes.push_back(c->candidateHash);
        byHash.emplace(c->candidateHash, c);
    }
    std::vector<PresentedCandidate> out;
    for (const auto& h : seeded_permutation(seed, assessorId, threadId, std::move(hashes))) {
        out.push_back({h, byHash.at(h)->subjectText});
    }
    return out;
}

std::string_view to_string(CellDisposition d) noexcept {
    switch (d) {
        case CellDisposition::Accepted: return "accepted";
        case CellDisposition::Rejected: return "rejected";
        case CellDisposition::Blocked: return "blocked";
        case CellDisposition::Skipped: return "skipped";
    }
    return "unknown";
}

std::size_t RunReport::count(TaskKind stage, CellDisposition d) const {
    return static_cast<std::size_t>(
        std::count_if(cells.begin(), cells.end(), [&](const auto& c) { return c.stage == stage && c.disposition == d; }));
}

bool RunReport::complete() const {
    return std::all_of(cells.begin(), cells.end(), [](const auto& c) {
        return c.disposition == CellDisposition::Accepted || c.disposition == CellDisposition::Skipped;
    });
}

json to_json_report(const RunReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells) {
        cells.push_back({{"stage", c.stage == TaskKind::Generation ? "generate" : "judge"},
                         {"threadId", c.threadId},
                         {"endpoint", c.endpoint},
                         {"disposition", std::string(to_string(c.disposition))},
                         {"attempts", c.attempts},
                         {"reasons", c.reasons}});
    }
    json summary = json::object();
    for (auto stage : {TaskKind::Generation, TaskKind::Judging}) {
        json counts = json::object();
        for (auto d : {CellDisposition::Accepted, CellDisposition::Rejected, CellDisposition::Blocked, CellDisposition::Skipped}) {
            counts[std::string(to_string(d))] = report.count(stage, d);
        }
        summary[stage == TaskKind::Generation ? "generate" : "judge"] = counts;
    }
    return {{"cells", cells}, {"summary", summary}, {"endpointCalls", report.endpointCalls}, {"complete", report.complete()}};
}

namespace {

/// Runs `work` for cells 0..n-1 on up to `concurrency` threads and calls
/// `commit` strictly in index order, each as soon as its prefix is done.
template <typename Result, typename Work, typename Commit>
void run_ordered(std::size_t n, int concurrency, Work&& work, Commit&& commit) {
    std::vector<std::optional<Result>> slots(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex commitMutex;
    std::size_t nextCommit = 0;
    std::exception_ptr failure;

    auto worker = [&] {
        while (!abort.load()) {
            const auto i = next.fetch_add(1);
            if (i >= n) return;
            try {
                Result r = work(i);
                std::lock_guard lock(commitMutex);
                slots[i] = std::move(r);
                while (nextCommit < n && slots[nextCommit]) {
                    commit(nextCommit, *slots[nextCommit]);
                    ++nextCommit;
                }
            } catch (...) {
                std::lock_guard lock(commitMutex);
                if (!failure) failure = std::current_exception();
                abort = true;
                return;
            }
        }
    };

    const int threads = std::max(1, std::min<int>(concurrency, static_cast<int>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

CellReport cell_from_attempts(TaskKind stage, const ThreadId& thread, const ModelLabel& endpoint,
                              const std::vector<AttemptRecord>& attempts, bool accepted) {
    CellReport cell{stage, thread, endpoint, accepted ? CellDisposition::Accepted : CellDisposition::Rejected,
                    static_cast<int>(attempts.size()), {}};
    if (!accepted) {
        for (const auto& a : attempts) {
            for (const auto& r : a.reasons) {
                cell.reasons.push_back("attempt " + std::to_string(a.attempt) + " " +
                                       std::string(to_string(a.failure.value_or(FailureKind::Invalid))) + ": " + r);
            }
        }
    }
    return cell;
}

}  // namespace

RunReport run_study_pipeline(StudyStore& store, const EndpointFactory& factory, const PipelineOptions& options) {
    const auto& config = store.config();
    RunReport report;
    std::mutex reportMutex;

    if (options.generate) {
        const auto state = store.snapshot();
        std::set<std::pair<ThreadId, ModelLabel>> done;
        for (const auto& c : state->dataset.candidates) done.insert({c.threadId, c.generatorModel});

        std::vector<std::shared_ptr<ChatEndpoint>> endpoints;
        for (const auto& g : config.generators) endpoints.push_back(factory(g));

        struct Cell {
            const EmailThread* thread;
            std::size_t generator;
        };
        std::vector<Cell> cells;
        for (const auto& t : state->dataset.threads) {
            for (std::size_t g = 0; g < config.generators.size(); ++g) cells.push_back({&t, g});
        }

        struct Outcome {
            CellReport report;
            std::optional<SubjectCandidate> candidate;
        };

        run_ordered<Outcome>(
            cells.size(), options.concurrency,
            [&](std::size_t i) -> Outcome {
                const auto& cell = cells[i];
                const auto& endpoint = config.generators[cell.generator];
                const auto& threadId = cell.thread->threadId;
                if (done.count({threadId, endpoint.label})) {
                    return {{TaskKind::Generation, threadId, endpoint.label, CellDisposition::Skipped, 0, {}}, std::nullopt};
                }
                auto result = generate_subject(*endpoints[cell.generator], *cell.thread, options.maxAttempts,
                                               {endpoint.temperature, endpoint.maxTokens});
                return {cell_from_attempts(TaskKind::Generation, threadId, endpoint.label, result.attempts, result.accepted()),
                        std::move(result.candidate)};
            },
            [&](std::size_t, Outcome& outcome) {
                if (outcome.candidate) store.append_candidates({std::move(*outcome.candidate)});
                std::lock_guard lock(reportMutex);
                report.endpointCalls += outcome.report.attempts;
                report.cells.push_back(std::move(outcome.report));
            });
    }

    if (options.judge) {
        const auto state = store.snapshot();
        const auto& dataset = state->dataset;

        struct Cell {
            const EmailThread* thread;
            std::size_t assessor;
        };
        std::vector<Cell> cells;
        for (const auto& t : dataset.threads) {
            for (std::size_t a = 0; a < config.aiAssessors.size(); ++a) cells.push_back({&t, a});
        }
        std::vector<std::shared_ptr<ChatEndpoint>> endpoints;
        for (const auto& e : config.aiAssessors) endpoints.push_back(factory(e));

        struct Outcome {
            CellReport report;
            std::optional<std::vector<Assessment>> assessments;
        };

        run_ordered<Outcome>(
            cells.size(), options.concurrency,
            [&](std::size_t i) -> Outcome {
                const auto& cell = cells[i];
                const auto& endpoint = config.aiAssessors[cell.assessor];
                const auto& threadId = cell.thread->threadId;
                if (state->submitted(endpoint.label, threadId)) {
                    return {{TaskKind::Judging, threadId, endpoint.label, CellDisposition::Skipped, 0, {}}, std::nullopt};
                }
                auto presented = presentation_for(dataset, config.seed, endpoint.label, threadId);
                if (static_cast<int>(presented.size()) != config.candidatesPerThread) {
                    return {{TaskKind::Judging, threadId, endpoint.label, CellDisposition::Blocked, 0,
                             {"thread has " + std::to_string(presented.size()) + " of " +
                              std::to_string(config.candidatesPerThread) + " candidates"}},
                            std::nullopt};
                }
                auto result = judge_thread(*endpoints[cell.assessor], endpoint.label, *cell.thread, std::move(presented),
                                           options.maxAttempts, {endpoint.temperature, endpoint.maxTokens});
                return {cell_from_attempts(TaskKind::Judging, threadId, endpoint.label, result.attempts, result.accepted()),
                        std::move(result.assessments)};
            },
            [&](std::size_t, Outcome& outcome) {
                if (outcome.assessments) store.append_assessments(std::move(*outcome.assessments));
                std::lock_guard lock(reportMutex);
                report.endpointCalls += outcome.report.attempts;
                report.cells.push_back(std::move(outcome.report));
            });
    }
    return report;
}

}  // namespace tierrank
