#include "tierrank/endpoint.hpp"
#include "tierrank/errors.hpp"
#include "tierrank/json_io.hpp"
#include "tierrank/pipeline.hpp"
#include "tierrank/report.hpp"
#include "tierrank/service.hpp"
#include "tierrank/store.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <pthread.h>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tierrank;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kIncomplete = 3 };

struct CliError : std::runtime_error {
    CliError(std::string code, const std::string& message, std::vector<std::string> details = {})
        : std::runtime_error(message), code(std::move(code)), details(std::move(details)) {}
    std::string code;
    std::vector<std::string> details;
};

json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw CliError("io_error", "cannot read " + p.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw CliError("invalid_json", p.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& p, const json& j) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw CliError("io_error", "cannot write " + p.string());
    out << j.dump(2) << '\n';
}

void print_error(const std::string& code, const std::string& message, const std::vector<std::string>& details) {
    json err{{"code", code}, {"message", message}};
    if (!details.empty()) err["details"] = details;
    std::cerr << json{{"error", err}}.dump() << std::endl;
}

struct Options {
    std::string study;
    std::string config;
    std::string endpointConfig;
    std::string threads;
    std::string assessments;
    std::string mock;
    std::string out;
    std::string host = "127.0.0.1";
    std::optional<std::uint64_t> seed;
    std::optional<double> targetAlpha;
    double step = kDefaultSweepStep;
    int concurrency = 1;
    int maxAttempts = kDefaultMaxAttempts;
    int port = 8080;
};

std::vector<EmailThread> read_threads(const fs::path& p) {
    try {
        return read_json_file(p).get<std::vector<EmailThread>>();
    } catch (const json::exception& e) {
        throw CliError("invalid_threads", p.string() + ": " + e.what());
    }
}

void import_files(StudyStore& store, const Options& o) {
    if (!o.threads.empty()) store.append_threads(read_threads(o.threads));
    if (!o.assessments.empty()) {
        std::vector<Assessment> all;
        try {
            all = read_json_file(o.assessments).get<std::vector<Assessment>>();
        } catch (const json::exception& e) {
            throw CliError("invalid_assessments", o.assessments + ": " + e.what());
        }
        std::map<std::pair<AssessorId, ThreadId>, std::vector<Assessment>> groups;
        for (auto& a : all) groups[{a.assessorId, a.threadId}].push_back(std::move(a));
        for (auto& [key, group] : groups) {
            if (store.snapshot()->submitted(key.first, key.second)) continue;
            store.append_assessments(std::move(group));
        }
    }
}

int cmd_init(const Options& o) {
    const fs::path dir = fs::absolute(o.study).lexically_normal();
    json cfg = read_json_file(o.config);
    if (!o.endpointConfig.empty()) {
        const json endpoints = read_json_file(o.endpointConfig);
        for (const char* key : {"generators", "aiAssessors"}) {
            if (endpoints.contains(key)) cfg[key] = endpoints[key];
        }
    }
    const std::string name = dir.filename().string();
    if (cfg.contains("studyId") && cfg["studyId"] != name) {
        throw CliError("invalid_config", "studyId '" + cfg["studyId"].get<std::string>() +
                                             "' does not match study directory name '" + name + "'");
    }
    cfg["studyId"] = name;
    cfg["storageRoot"] = dir.parent_path().string();
    if (o.seed) cfg["seed"] = *o.seed;
    if (o.targetAlpha) cfg["targetAlpha"] = *o.targetAlpha;

    StudyConfig config;
    try {
        config = cfg.get<StudyConfig>();
    } catch (const json::exception& e) {
        throw CliError("invalid_config", e.what());
    }
    auto store = StudyStore::create(dir.parent_path(), config);
    import_files(store, o);
    std::cout << json{{"study", store.dir().string()}, {"tokens", store.tokens()}}.dump(2) << std::endl;
    return kOk;
}

int cmd_import(const Options& o) {
    auto store = StudyStore::open(o.study);
    import_files(store, o);
    const auto state = store.snapshot();
    std::cout << json{{"threads", state->dataset.threads.size()},
                      {"candidates", state->dataset.candidates.size()},
                      {"assessments", state->dataset.assessments.size()}}
                     .dump()
              << std::endl;
    return kOk;
}

int cmd_pipeline(const Options& o, TaskKind stage) {
    auto store = StudyStore::open(o.study);
    if (store.snapshot()->dataset.threads.empty()) throw StageError("stage not complete: no threads imported", {});
    if (stage == TaskKind::Judging) {
        if (auto missing = missing_generation_cells(store); !missing.empty()) {
            throw StageError("stage not complete: candidates missing", std::move(missing));
        }
    }
    PipelineOptions options;
    options.concurrency = o.concurrency;
    options.maxAttempts = o.maxAttempts;
    options.generate = stage == TaskKind::Generation;
    options.judge = stage == TaskKind::Judging;
    const EndpointFactory factory = o.mock.empty() ? http_endpoint_factory() : fixture_endpoint_factory(o.mock);

    const auto report = run_study_pipeline(store, factory, options);
    const std::string name = stage == TaskKind::Generation ? "generate" : "judge";
    const fs::path reportPath = store.reports_dir() / ("run_report_" + name + ".json");
    write_json_file(reportPath, to_json_report(report));

    std::cout << json{{"stage", name},
                      {"accepted", report.count(stage, CellDisposition::Accepted)},
                      {"skipped", report.count(stage, CellDisposition::Skipped)},
                      {"rejected", report.count(stage, CellDisposition::Rejected)},
                      {"blocked", report.count(stage, CellDisposition::Blocked)},
                      {"endpointCalls", report.endpointCalls},
                      {"report", reportPath.string()}}
                     .dump()
              << std::endl;
    if (!report.complete()) {
        std::vector<std::string> failed;
        for (const auto& c : report.cells) {
            if (c.disposition == CellDisposition::Rejected || c.disposition == CellDisposition::Blocked) {
                failed.push_back(c.threadId + "/" + c.endpoint + " (" + std::string(to_string(c.disposition)) + ")");
            }
        }
        print_error("incomplete", name + " left cells without an accepted result", failed);
        return kIncomplete;
    }
    return kOk;
}

int cmd_serve(const Options& o) {
    auto store = StudyStore::open(o.study);
    SessionService service(store);
    HttpApiServer server(service);
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    const int port = server.start(o.host, o.port);
    std::cout << json{{"listening", o.host + ":" + std::to_string(port)}}.dump() << std::endl;
    int received = 0;
    sigwait(&signals, &received);
    server.stop();
    return kOk;
}

int cmd_filter(const Options& o) {
    const auto store = StudyStore::open(o.study);
    const double target = o.targetAlpha.value_or(store.config().targetAlpha);
    const auto result = run_filter_stage(store, target, o.step);
    std::cout << json{{"chosenThreshold", result.outcome.chosenThreshold},
                      {"alpha", result.outcome.alpha},
                      {"retainedItems", result.outcome.retainedItemHashes.size()},
                      {"outcome", (store.reports_dir() / "filter_outcome.json").string()}}
                     .dump()
              << std::endl;
    return kOk;
}

int cmd_analyze(const Options& o) {
    const auto store = StudyStore::open(o.study);
    const auto bundle = run_analyze_stage(store);
    json out{{"models", bundle.summaries.size()}, {"analysis", (store.reports_dir() / "analysis.json").string()}};
    if (bundle.regression) out["regression"] = {{"slope", bundle.regression->slope}, {"rSquared", bundle.regression->rSquared}};
    std::cout << out.dump() << std::endl;
    return kOk;
}

int cmd_report(const Options& o) {
    const auto store = StudyStore::open(o.study);
    std::cout << json{{"report", run_report_stage(store).string()}}.dump() << std::endl;
    return kOk;
}

int cmd_export(const Options& o) {
    const auto store = StudyStore::open(o.study);
    const json doc = export_study(store);
    if (o.out.empty()) {
        std::cout << doc.dump(2) << std::endl;
    } else {
        write_json_file(o.out, doc);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical categorise-then-rank studies of generated email subject lines"};
    app.require_subcommand(1);
    Options o;

    auto studyOpt = [&](CLI::App* cmd) { cmd->add_option("--study", o.study, "Study directory")->required(); };

    auto* init = app.add_subcommand("init", "Create a study directory from a config file");
    studyOpt(init);
    init->add_option("--config", o.config, "Study config JSON")->required()->check(CLI::ExistingFile);
    init->add_option("--endpoint-config", o.endpointConfig, "JSON with generators / aiAssessors endpoint lists")
        ->check(CLI::ExistingFile);
    init->add_option("--threads", o.threads, "Thread fixture JSON to import")->check(CLI::ExistingFile);
    init->add_option("--seed", o.seed, "Presentation seed");
    init->add_option("--target-alpha", o.targetAlpha, "Default alpha target for filter")->check(CLI::Range(0.0, 1.0));

    auto* import = app.add_subcommand("import", "Append threads or assessment records");
    studyOpt(import);
    import->add_option("--threads", o.threads, "Thread fixture JSON")->check(CLI::ExistingFile);
    import->add_option("--assessments", o.assessments, "Assessment records JSON")->check(CLI::ExistingFile);

    auto* generate = app.add_subcommand("generate", "Generate candidate subject lines");
    auto* judge = app.add_subcommand("judge", "Collect AI assessor rankings");
    for (auto* cmd : {generate, judge}) {
        studyOpt(cmd);
        cmd->add_option("--mock", o.mock, "Fixture directory; replaces live endpoints");
        cmd->add_option("--concurrency", o.concurrency, "Parallel endpoint calls")->check(CLI::PositiveNumber);
        cmd->add_option("--max-attempts", o.maxAttempts, "Attempts per cell")->check(CLI::PositiveNumber);
    }

    auto* serve = app.add_subcommand("serve", "Serve the assessment session API");
    studyOpt(serve);
    serve->add_option("--host", o.host, "Bind address");
    serve->add_option("--port", o.port, "Port (0 picks a free port)")->check(CLI::Range(0, 65535));

    auto* filter = app.add_subcommand("filter", "Agreement sweep and threshold selection");
    studyOpt(filter);
    filter->add_option("--target-alpha", o.targetAlpha, "Alpha target")->check(CLI::Range(0.0, 1.0));
    filter->add_option("--step", o.step, "Threshold step")->check(CLI::Range(1e-6, 1.0));

    auto* analyze = app.add_subcommand("analyze", "Model summaries, agreement matrices, regression");
    studyOpt(analyze);
    auto* report = app.add_subcommand("report", "Write report.md");
    studyOpt(report);
    auto* exportCmd = app.add_subcommand("export", "Dump config and dataset as JSON");
    studyOpt(exportCmd);
    exportCmd->add_option("--out", o.out, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what(), {});
        return kUsage;
    }

    try {
        if (*init) return cmd_init(o);
        if (*import) return cmd_import(o);
        if (*generate) return cmd_pipeline(o, TaskKind::Generation);
        if (*judge) return cmd_pipeline(o, TaskKind::Judging);
        if (*serve) return cmd_serve(o);
        if (*filter) return cmd_filter(o);
        if (*analyze) return cmd_analyze(o);
        if (*report) return cmd_report(o);
        if (*exportCmd) return cmd_export(o);
    } catch (const CliError& e) {
        print_error(e.code, e.what(), e.details);
    } catch (const StageError& e) {
        print_error("stage_not_complete", e.what(), e.missing());
    } catch (const InfeasibleThresholdError& e) {
        print_error("infeasible_target", e.what(), {});
    } catch (const ValidationError& e) {
        print_error("validation_error", e.what(), e.details());
    } catch (const StorageError& e) {
        print_error("storage_error", e.what(), {});
    } catch (const std::exception& e) {
        print_error("failure", e.what(), {});
    }
    return kFailure;
}
