#include "support.hpp"

#include "tierrank/json_io.hpp"
#include "tierrank/store.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <csignal>
#include <fstream>
#include <spawn.h>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

using namespace tierrank;
using namespace tierrank::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class CliTest : public ::testing::Test {
protected:
    CliResult run(const std::string& args) {
        const auto out = tmp_.path() / "stdout", err = tmp_.path() / "stderr";
        const std::string cmd = std::string(TIERRANK_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
    }

    std::string study() const { return (tmp_.path() / "studies" / "demo").string(); }

    void write_inputs() {
        json config = mock_config("demo", 11, 3, 2);
        config.erase("studyId");
        config.erase("storageRoot");
        config.erase("generators");
        config.erase("aiAssessors");
        std::ofstream(tmp_.path() / "config.json") << config.dump();
        const auto full = mock_config("demo", 11, 3, 2);
        std::ofstream(tmp_.path() / "endpoints.json")
            << json{{"generators", full.generators}, {"aiAssessors", full.aiAssessors}}.dump();
        std::vector<EmailThread> threads;
        for (int t = 0; t < 4; ++t) threads.push_back(make_thread(thread_label(t)));
        std::ofstream(tmp_.path() / "threads.json") << json(threads).dump();
    }

    CliResult init() {
        return run("init --study " + study() + " --config " + (tmp_.path() / "config.json").string() + " --endpoint-config " +
                   (tmp_.path() / "endpoints.json").string() + " --threads " + (tmp_.path() / "threads.json").string() +
                   " --seed 99");
    }

    /// Humans copy the first AI judge so the filter target is reachable. With
    /// `invert`, h1 mirrors that judge instead (Good <-> Poor, ranks reversed).
    void import_human_assessments(bool invert = false) {
        const int k = 11;
        const auto d = load_dataset(study());
        std::vector<Assessment> humans;
        for (const auto& a : d.assessments) {
            if (a.assessorId != "judge-0") continue;
            for (const auto* h : {"h0", "h1", "h2"}) {
                auto copy = a;
                copy.assessorId = h;
                if (invert && std::string(h) == "h1") {
                    copy.globalRank = k + 1 - copy.globalRank;
                    copy.bucket = static_cast<QualityBucket>(4 - ordinal(copy.bucket));
                }
                humans.push_back(copy);
            }
        }
        std::ofstream(tmp_.path() / "human.json") << json(humans).dump();
        const auto r = run("import --study " + study() + " --assessments " + (tmp_.path() / "human.json").string());
        ASSERT_EQ(r.code, 0) << r.err;
    }

    static json error_of(const CliResult& r) { return json::parse(r.err).at("error"); }

    TempDir tmp_;
};

}  // namespace

TEST_F(CliTest, FullWorkflow) {
    write_inputs();
    auto r = init();
    ASSERT_EQ(r.code, 0) << r.err;
    const auto created = json::parse(r.out);
    EXPECT_EQ(created["tokens"].size(), 3u);
    EXPECT_EQ(load_config(study()).seed, 99u);
    EXPECT_TRUE(fs::exists(fs::path(study()) / "config"));

    r = run("analyze --study " + study());
    EXPECT_NE(r.code, 0);
    EXPECT_EQ(error_of(r)["code"], "stage_not_complete");

    r = run("judge --study " + study() + " --mock " + (tmp_.path() / "fixtures").string());
    EXPECT_NE(r.code, 0);
    EXPECT_EQ(error_of(r)["code"], "stage_not_complete");
    EXPECT_EQ(error_of(r)["details"].size(), 44u);

    r = run("generate --study " + study() + " --mock " + (tmp_.path() / "fixtures").string() + " --concurrency 3");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out)["accepted"], 44);
    EXPECT_TRUE(fs::exists(fs::path(study()) / "reports" / "run_report_generate.json"));

    r = run("generate --study " + study() + " --mock " + (tmp_.path() / "fixtures").string());
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(json::parse(r.out)["endpointCalls"], 0);

    r = run("judge --study " + study() + " --mock " + (tmp_.path() / "fixtures").string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out)["accepted"], 8);

    r = run("filter --study " + study());
    EXPECT_EQ(error_of(r)["code"], "stage_not_complete");
    import_human_assessments();

    r = run("filter --study " + study() + " --target-alpha 0.667");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto outcome = json::parse(slurp(fs::path(study()) / "reports" / "filter_outcome.json"));
    EXPECT_TRUE(outcome.contains("chosenThreshold"));
    EXPECT_GE(outcome["alpha"].get<double>(), 0.667);
    EXPECT_TRUE(fs::exists(fs::path(study()) / "reports" / "sweep.csv"));

    r = run("report --study " + study());
    EXPECT_EQ(error_of(r)["code"], "stage_not_complete");

    r = run("analyze --study " + study());
    ASSERT_EQ(r.code, 0) << r.err;
    for (const auto* f : {"analysis.json", "bucket_counts.csv", "spearman_matrix.csv", "kendall_matrix.csv",
                          "rank_boxplot.csv", "regression.csv"}) {
        EXPECT_TRUE(fs::exists(fs::path(study()) / "reports" / f)) << f;
    }

    r = run("report --study " + study());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto md = slurp(fs::path(study()) / "reports" / "report.md");
    EXPECT_NE(md.find("| Bucket | Before | After | Retained | Reduction |"), std::string::npos);
    for (const auto* b : {"| Good |", "| Fair |", "| Poor |"}) EXPECT_NE(md.find(b), std::string::npos);

    r = run("export --study " + study() + " --out " + (tmp_.path() / "export.json").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto exported = json::parse(slurp(tmp_.path() / "export.json"));
    EXPECT_EQ(exported["dataset"]["candidates"].size(), 44u);
    EXPECT_EQ(exported["dataset"]["assessments"].size(), 44u * 5u);
    EXPECT_EQ(exported["config"]["studyId"], "demo");
}

TEST_F(CliTest, InfeasibleTargetIsMachineReadable) {
    write_inputs();
    ASSERT_EQ(init().code, 0);
    ASSERT_EQ(run("generate --study " + study() + " --mock " + tmp_.path().string()).code, 0);
    ASSERT_EQ(run("judge --study " + study() + " --mock " + tmp_.path().string()).code, 0);
    import_human_assessments(true);
    const auto r = run("filter --study " + study() + " --target-alpha 1.0");
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(error_of(r)["code"], "infeasible_target");
    EXPECT_TRUE(fs::exists(fs::path(study()) / "reports" / "sweep.csv"));
    EXPECT_FALSE(fs::exists(fs::path(study()) / "reports" / "filter_outcome.json"));
}

TEST_F(CliTest, UsageAndInitErrors) {
    auto r = run("frobnicate");
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(error_of(r)["code"], "usage");

    r = run("filter");
    EXPECT_EQ(r.code, 2);

    r = run("analyze --study " + (tmp_.path() / "nowhere").string());
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(error_of(r)["code"], "storage_error");

    write_inputs();
    ASSERT_EQ(init().code, 0);
    r = init();
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(error_of(r)["code"], "storage_error");

    std::ofstream(tmp_.path() / "bad.json") << R"({"studyId":"other"})";
    r = run("init --study " + study() + "2 --config " + (tmp_.path() / "bad.json").string());
    EXPECT_EQ(error_of(r)["code"], "invalid_config");
}

TEST_F(CliTest, RejectedCellsExitIncomplete) {
    write_inputs();
    ASSERT_EQ(init().code, 0);
    const auto cell = tmp_.path() / "fixtures" / "gen-m03" / "t01";
    fs::create_directories(cell);
    std::ofstream(cell / "default.json") << "not json";
    const auto r = run("generate --study " + study() + " --mock " + (tmp_.path() / "fixtures").string() + " --max-attempts 3");
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(error_of(r)["code"], "incomplete");
    EXPECT_EQ(error_of(r)["details"][0], "t01/gen-m03 (rejected)");
    const auto report = json::parse(slurp(fs::path(study()) / "reports" / "run_report_generate.json"));
    EXPECT_EQ(report["cells"].size(), 44u);
}

TEST_F(CliTest, ServeAnswersAndStopsOnSigterm) {
    write_inputs();
    ASSERT_EQ(init().code, 0);
    int fds[2];
    ASSERT_EQ(pipe(fds), 0);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, fds[0]);
    const std::string studyDir = study();
    std::vector<std::string> args{TIERRANK_CLI, "serve", "--study", studyDir, "--port", "0"};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    ASSERT_EQ(posix_spawn(&pid, TIERRANK_CLI, &actions, nullptr, argv.data(), environ), 0);
    posix_spawn_file_actions_destroy(&actions);
    close(fds[1]);

    std::string line;
    char ch = 0;
    while (read(fds[0], &ch, 1) == 1 && ch != '\n') line.push_back(ch);
    close(fds[0]);
    const auto listening = json::parse(line)["listening"].get<std::string>();
    const int port = std::stoi(listening.substr(listening.rfind(':') + 1));

    httplib::Client client("127.0.0.1", port);
    auto res = client.Get("/sessions/abc", {{"Authorization", "Bearer nope"}});
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 401);

    kill(pid, SIGTERM);
    int status = 0;
    waitpid(pid, &status, 0);
    EXPECT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 0);
}
