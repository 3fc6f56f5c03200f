#include "support.hpp"

#include "tierrank/endpoint.hpp"
#include "tierrank/json_io.hpp"
#include "tierrank/pipeline.hpp"
#include "tierrank/service.hpp"
#include "tierrank/store.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <set>
#include <thread>

using namespace tierrank;
using namespace tierrank::testing;
using nlohmann::json;

namespace {

class ServiceTest : public ::testing::Test {
protected:
    void SetUp() override {
        store_.emplace(StudyStore::create(tmp_.path(), mock_config("study1", 11, 3, 1)));
        std::vector<EmailThread> threads;
        for (int t = 0; t < 3; ++t) threads.push_back(make_thread(thread_label(t)));
        store_->append_threads(threads);
        PipelineOptions opts;
        opts.judge = false;
        run_study_pipeline(*store_, [](const ModelEndpoint& e) -> std::shared_ptr<ChatEndpoint> {
            return std::make_shared<SyntheticEndpoint>(e.label);
        }, opts);
        store_->append_threads({make_thread("pending")});

        service_.emplace(*store_, [] { return std::string("2024-01-05T09:30:00Z"); });
        server_.emplace(*service_);
        port_ = server_->start("127.0.0.1", 0);
        client_.emplace("127.0.0.1", port_);
    }

    void TearDown() override { server_->stop(); }

    httplib::Headers auth(const std::string& assessor) const {
        return {{"Authorization", "Bearer " + store_->tokens().at(assessor)}};
    }

    std::string open(const std::string& assessor, const std::string& thread, int expectStatus = 201) {
        auto res = client_->Post("/studies/study1/sessions", auth(assessor), json{{"threadId", thread}}.dump(), "application/json");
        EXPECT_TRUE(res);
        EXPECT_EQ(res->status, expectStatus) << res->body;
        return json::parse(res->body).value("sessionId", "");
    }

    json payload(const std::string& assessor, const std::string& sid) {
        auto res = client_->Get("/sessions/" + sid, auth(assessor));
        EXPECT_EQ(res->status, 200) << res->body;
        return json::parse(res->body);
    }

    httplib::Result submit(const std::string& assessor, const std::string& sid, const json& body) {
        return client_->Post("/sessions/" + sid + "/submission", auth(assessor), body.dump(), "application/json");
    }

    static json bucketed(const json& candidates) {
        json good = json::array(), fair = json::array(), poor = json::array();
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            (i < 2 ? good : i < 8 ? fair : poor).push_back(candidates[i]["candidateHash"]);
        }
        return {{"Good", good}, {"Fair", fair}, {"Poor", poor}};
    }

    TempDir tmp_;
    std::optional<StudyStore> store_;
    std::optional<SessionService> service_;
    std::optional<HttpApiServer> server_;
    std::optional<httplib::Client> client_;
    int port_ = 0;
};

}  // namespace

TEST_F(ServiceTest, PayloadIsBlindedAndSeededlyShuffled) {
    const auto sid = open("h0", "t00");
    EXPECT_EQ(sid, session_id_for("study1", "h0", "t00"));
    const auto p = payload("h0", sid);
    ASSERT_EQ(p["candidates"].size(), 11u);
    EXPECT_EQ(p["state"], "open");
    EXPECT_EQ(p["thread"]["text"], format_thread_for_prompt(*store_->snapshot()->dataset.find_thread("t00")));

    const auto text = p.dump();
    for (const auto& g : store_->config().generators) EXPECT_EQ(text.find(g.label), std::string::npos) << g.label;
    for (const auto& c : p["candidates"]) EXPECT_EQ(c.size(), 2u);

    std::vector<CandidateHash> shown, all;
    for (const auto& c : p["candidates"]) shown.push_back(c["candidateHash"].get<CandidateHash>());
    for (const auto* c : store_->snapshot()->dataset.candidates_for("t00")) all.push_back(c->candidateHash);
    EXPECT_EQ(shown, seeded_permutation(store_->config().seed, "h0", "t00", all));

    const auto other = payload("h1", open("h1", "t00"));
    EXPECT_NE(other["candidates"], p["candidates"]);
}

TEST_F(ServiceTest, ReopenIsIdempotent) {
    const auto sid = open("h0", "t01");
    EXPECT_EQ(open("h0", "t01", 200), sid);
    EXPECT_EQ(store_->snapshot()->sessions.size(), 1u);
}

TEST_F(ServiceTest, ValidSubmissionPersistsGroup) {
    const auto sid = open("h0", "t00");
    const auto p = payload("h0", sid);
    auto res = submit("h0", sid, bucketed(p["candidates"]));
    ASSERT_EQ(res->status, 200) << res->body;

    const auto d = load_dataset(store_->dir());
    std::set<int> ranks;
    for (const auto& a : d.assessments) {
        if (a.assessorId == "h0" && a.threadId == "t00") ranks.insert(a.globalRank);
    }
    EXPECT_EQ(ranks.size(), 11u);
    EXPECT_EQ(*ranks.rbegin(), 11);

    const auto after = payload("h0", sid);
    EXPECT_EQ(after["state"], "submitted");
    EXPECT_EQ(after["submittedAt"], "2024-01-05T09:30:00Z");
    EXPECT_EQ(after["result"], bucketed(p["candidates"]));

    auto dup = submit("h0", sid, bucketed(p["candidates"]));
    EXPECT_EQ(dup->status, 409);
    EXPECT_EQ(json::parse(dup->body)["error"]["code"], "already_submitted");
    open("h0", "t00", 409);
}

TEST_F(ServiceTest, OverlapIs422WithDiagnostic) {
    const auto sid = open("h0", "t00");
    auto body = bucketed(payload("h0", sid)["candidates"]);
    body["Fair"].push_back(body["Good"][0]);
    auto res = submit("h0", sid, body);
    ASSERT_EQ(res->status, 422);
    const auto err = json::parse(res->body)["error"];
    ASSERT_FALSE(err["diagnostics"].empty());
    EXPECT_EQ(err["diagnostics"][0].get<std::string>().rfind("overlap", 0), 0u);
    EXPECT_TRUE(load_dataset(store_->dir()).assessments.empty());
}

TEST_F(ServiceTest, MissingAndMalformedAre422) {
    const auto sid = open("h0", "t00");
    auto body = bucketed(payload("h0", sid)["candidates"]);
    body["Poor"].erase(body["Poor"].size() - 1);
    auto res = submit("h0", sid, body);
    EXPECT_EQ(res->status, 422);
    EXPECT_EQ(json::parse(res->body)["error"]["diagnostics"][0].get<std::string>().rfind("missing", 0), 0u);

    EXPECT_EQ(submit("h0", sid, json{{"Good", "x"}})->status, 422);
    EXPECT_EQ(client_->Post("/sessions/" + sid + "/submission", auth("h0"), "{", "application/json")->status, 422);
    EXPECT_EQ(client_->Post("/studies/study1/sessions", auth("h0"), "[]", "application/json")->status, 422);
}

TEST_F(ServiceTest, AuthAndNotFound) {
    const auto sid = open("h0", "t00");
    EXPECT_EQ(client_->Get("/sessions/" + sid)->status, 401);
    EXPECT_EQ(client_->Get("/sessions/" + sid, {{"Authorization", "Bearer nope"}})->status, 401);
    EXPECT_EQ(client_->Get("/sessions/" + sid, {{"Authorization", store_->tokens().at("h0")}})->status, 401);
    EXPECT_EQ(client_->Get("/sessions/ffffffffffffffff", auth("h0"))->status, 404);
    EXPECT_EQ(client_->Get("/sessions/" + sid, auth("h1"))->status, 404);
    EXPECT_EQ(client_->Post("/studies/other/sessions", auth("h0"), R"({"threadId":"t00"})", "application/json")->status, 404);
    open("h0", "t99", 404);
}

TEST_F(ServiceTest, ThreadWithoutCandidatesIsStageNotComplete) {
    auto res = client_->Post("/studies/study1/sessions", auth("h0"), R"({"threadId":"pending"})", "application/json");
    ASSERT_EQ(res->status, 409);
    EXPECT_EQ(json::parse(res->body)["error"]["code"], "stage_not_complete");
}

TEST_F(ServiceTest, ConcurrentAssessors) {
    std::vector<std::thread> workers;
    std::atomic<int> ok{0};
    for (const auto* assessor : {"h0", "h1", "h2"}) {
        workers.emplace_back([&, assessor = std::string(assessor)] {
            httplib::Client c("127.0.0.1", port_);
            for (int t = 0; t < 3; ++t) {
                auto opened = c.Post("/studies/study1/sessions", auth(assessor), json{{"threadId", thread_label(t)}}.dump(),
                                     "application/json");
                if (!opened || opened->status != 201) continue;
                const auto sid = json::parse(opened->body)["sessionId"].get<std::string>();
                auto p = c.Get("/sessions/" + sid, auth(assessor));
                auto res = c.Post("/sessions/" + sid + "/submission", auth(assessor),
                                  bucketed(json::parse(p->body)["candidates"]).dump(), "application/json");
                if (res && res->status == 200) ++ok;
            }
        });
    }
    for (auto& w : workers) w.join();
    EXPECT_EQ(ok.load(), 9);
    const auto d = load_dataset(store_->dir());
    EXPECT_EQ(d.assessments.size(), 9u * 11u);
}

TEST(SessionIdTest, StableAndDistinct) {
    EXPECT_EQ(session_id_for("s", "a", "t"), session_id_for("s", "a", "t"));
    EXPECT_NE(session_id_for("s", "a", "t"), session_id_for("s", "t", "a"));
    EXPECT_EQ(session_id_for("s", "a", "t").size(), 16u);
    EXPECT_EQ(utc_timestamp().size(), 20u);
}
