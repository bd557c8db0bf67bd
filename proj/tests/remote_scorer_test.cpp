#include <gtest/gtest.h>

#include <cstdlib>

#include "fsap/error.hpp"
#include "fsap/http.hpp"
#include "fsap/remote_scorers.hpp"
#include "local_server.hpp"

using namespace fsap;

namespace {

RetryPolicy recording(std::vector<double>& sleeps) {
    RetryPolicy p;
    p.sleep = [&sleeps](std::chrono::duration<double> d) { sleeps.push_back(d.count()); };
    return p;
}

}  // namespace

TEST(Endpoint, SplitsBaseAndPath) {
    auto e = Endpoint::parse("https://api.example.org:8443/v1/embed");
    EXPECT_EQ(e.base, "https://api.example.org:8443");
    EXPECT_EQ(e.path, "/v1/embed");
    EXPECT_EQ(Endpoint::parse("http://localhost").path, "/");
    EXPECT_THROW(Endpoint::parse("localhost/x"), ConfigError);
}

TEST(Retry, BackoffDoublesFromOneSecond) {
    RetryPolicy p;
    EXPECT_DOUBLE_EQ(p.delay_before(2).count(), 1.0);
    EXPECT_DOUBLE_EQ(p.delay_before(3).count(), 2.0);
    EXPECT_DOUBLE_EQ(p.delay_before(5).count(), 8.0);
}

TEST(EmbeddingClient, CachesVectorsAndDeduplicatesInputs) {
    testsrv::LocalServer srv;
    std::vector<double> sleeps;
    EmbeddingClient client(JsonPoster(Endpoint::parse(srv.url("/embed")), std::nullopt), "m", 2, recording(sleeps));
    std::vector<std::string> texts{"a b", "banana", "a b"};
    auto v = client.embed(texts);
    ASSERT_EQ(v.size(), 3u);
    EXPECT_EQ(v[0], (std::vector<double>{2, 1}));
    EXPECT_EQ(v[1], (std::vector<double>{1, 3}));
    EXPECT_EQ(v[2], v[0]);
    EXPECT_EQ(client.requests_sent(), 1u);
    client.embed(texts);
    EXPECT_EQ(client.requests_sent(), 1u);
    EXPECT_EQ(srv.embed_calls, 1);
}

TEST(EmbeddingScorer, CosineAgainstQuery) {
    testsrv::LocalServer srv;
    auto client = std::make_shared<EmbeddingClient>(JsonPoster(Endpoint::parse(srv.url("/embed")), std::nullopt), "m", 1);
    EmbeddingScorer scorer("emb", client);
    std::vector<std::string> tokens{"a", "b"};
    auto chunks = chunk("d", tokens);
    // query "xyz" -> (1, 0); chunk "a b" -> (2, 1).
    auto scores = scorer.score_chunks("xyz", chunks, CorpusStats{});
    ASSERT_EQ(scores.size(), 1u);
    EXPECT_NEAR(scores[0], 2.0 / std::sqrt(5.0), 1e-12);
    EXPECT_NEAR(embedding_pair_score("xyz", "a b", *client), 2.0 / std::sqrt(5.0), 1e-12);
}

TEST(CrossEncoder, ScoresPassagesInOrder) {
    testsrv::LocalServer srv;
    CrossEncoderClient client(JsonPoster(Endpoint::parse(srv.url("/rerank")), std::nullopt), "ce", 1);
    std::vector<std::string> passages{"zinc and colds", "nothing here", "colds"};
    EXPECT_EQ(client.score("zinc colds", passages), (std::vector<double>{2, 0, 1}));
}

TEST(RemoteErrors, TransientFailuresAreRetriedWithBackoff) {
    testsrv::LocalServer srv;
    srv.fail_next = 2;
    std::vector<double> sleeps;
    CrossEncoderClient client(JsonPoster(Endpoint::parse(srv.url("/rerank")), std::nullopt), "ce", 1, recording(sleeps));
    std::vector<std::string> passages{"x"};
    EXPECT_EQ(client.score("x", passages), (std::vector<double>{1}));
    EXPECT_EQ(sleeps, (std::vector<double>{1.0, 2.0}));
    EXPECT_EQ(srv.rerank_calls, 3);
}

TEST(RemoteErrors, GivesUpAfterFiveAttempts) {
    testsrv::LocalServer srv;
    srv.fail_next = 100;
    srv.fail_status = 429;
    std::vector<double> sleeps;
    CrossEncoderClient client(JsonPoster(Endpoint::parse(srv.url("/rerank")), std::nullopt), "ce", 1, recording(sleeps));
    std::vector<std::string> passages{"x"};
    EXPECT_THROW(client.score("x", passages), TransientError);
    EXPECT_EQ(srv.rerank_calls, 5);
    EXPECT_EQ(sleeps, (std::vector<double>{1.0, 2.0, 4.0, 8.0}));
}

TEST(RemoteErrors, AuthAndMalformedResponsesAreNotRetried) {
    testsrv::LocalServer srv;
    srv.required_token = "s3cret";
    std::vector<double> sleeps;
    std::vector<std::string> passages{"x"};
    CrossEncoderClient unauth(JsonPoster(Endpoint::parse(srv.url("/rerank")), std::nullopt), "ce", 1, recording(sleeps));
    EXPECT_THROW(unauth.score("x", passages), AuthError);
    EXPECT_EQ(srv.rerank_calls, 1);

    CrossEncoderClient auth(JsonPoster(Endpoint::parse(srv.url("/rerank")), "s3cret"), "ce", 1, recording(sleeps));
    EXPECT_NO_THROW(auth.score("x", passages));
    EXPECT_EQ(srv.last_authorization, "Bearer s3cret");

    JsonPoster garbage(Endpoint::parse(srv.url("/garbage")), std::nullopt);
    try {
        garbage.post(json{{"x", 1}});
        FAIL() << "expected BackendError";
    } catch (const BackendError& e) {
        EXPECT_FALSE(e.retryable());
    }
    EXPECT_TRUE(sleeps.empty());
}

TEST(RemoteErrors, ConnectionRefusedIsTransient) {
    JsonPoster poster(Endpoint::parse("http://127.0.0.1:1/none"), std::nullopt, std::chrono::seconds(2));
    EXPECT_THROW(poster.post(json::object()), TransientError);
}

TEST(MakeScorer, RemoteCredentialsComeFromEnvironment) {
    ScorerSpec spec;
    spec.scorer_id = "ce";
    spec.kind = ScorerKind::remote_cross_encoder;
    spec.endpoint = "http://127.0.0.1:9/rerank";
    spec.model = "m";
    spec.api_key_env = "FSAP_TEST_UNSET_VARIABLE";
    ::unsetenv("FSAP_TEST_UNSET_VARIABLE");
    EXPECT_THROW(make_scorer(spec, RetryPolicy{}), ConfigError);
    ::setenv("FSAP_TEST_UNSET_VARIABLE", "k", 1);
    EXPECT_EQ(make_scorer(spec, RetryPolicy{})->id(), "ce");
    ::unsetenv("FSAP_TEST_UNSET_VARIABLE");

    ScorerSpec missing_endpoint;
    missing_endpoint.scorer_id = "e";
    missing_endpoint.kind = ScorerKind::remote_embedding;
    EXPECT_THROW(make_scorer(missing_endpoint, RetryPolicy{}), ConfigError);
}
