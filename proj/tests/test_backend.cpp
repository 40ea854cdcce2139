#include <cmath>
#include <random>
#include <thread>

#include <gmock/gmock.h>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "prefsteer/backend.hpp"
#include "prefsteer/reward.hpp"
#include "prefsteer/wire.hpp"
#include "test_util.hpp"

using namespace prefsteer;
using prefsteer::testing::TempDir;
using ::testing::ElementsAre;
using ::testing::HasSubstr;

namespace {

std::vector<double> values(const LogProbVector& v) {
  return std::vector<double>(v.values().begin(), v.values().end());
}

// Same support and log-probabilities within `tol` (the client renormalizes replies).
bool close(const LogProbVector& a, const LogProbVector& b, double tol = 1e-12) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isinf(a[i]) || std::isinf(b[i])) {
      if (a[i] != b[i]) return false;
    } else if (std::abs(a[i] - b[i]) > tol) {
      return false;
    }
  }
  return true;
}

DialogueContext ctx_of(const Vocabulary& v, std::string_view query, std::string_view prefix = "") {
  return DialogueContext{v.encode(query), v.encode(prefix), std::nullopt};
}

ToyLm two_token_lm() {
  auto table = ToyLmTable::empty(Vocabulary({"a", "b", "s"}, std::string()), 2);
  table.set("s", {0.9, 0.1, 0.0});
  return ToyLm(table);
}

TEST(ToyLm, SuffixHitGivesTableLogs) {
  const auto lm = two_token_lm();
  const auto v = lm.next_token_logprobs(ctx_of(lm.vocab(), "a s"));
  EXPECT_NEAR(v[0], std::log(0.9), 1e-15);
  EXPECT_NEAR(v[1], std::log(0.1), 1e-15);
  EXPECT_EQ(v[2], -std::numeric_limits<double>::infinity());
}

TEST(ToyLm, MissUsesUniformFallback) {
  const ToyLm lm(ToyLmTable::empty(Vocabulary({"a", "b"}, std::string()), 1));
  EXPECT_THAT(values(lm.next_token_logprobs(ctx_of(lm.vocab(), "a b"))),
              ElementsAre(std::log(0.5), std::log(0.5)));
}

TEST(ToyLm, LongestSuffixWins) {
  auto table = ToyLmTable::empty(Vocabulary({"x", "y", "z"}), 3);
  table.set("y", {0.2, 0.3, 0.5});
  table.set("x y", {0.6, 0.2, 0.2});
  const ToyLm lm(table);
  EXPECT_NEAR(lm.next_token_logprobs(ctx_of(lm.vocab(), "x y"))[0], std::log(0.6), 1e-15);
  EXPECT_NEAR(lm.next_token_logprobs(ctx_of(lm.vocab(), "z y"))[0], std::log(0.2), 1e-15);
  EXPECT_NEAR(lm.next_token_logprobs(ctx_of(lm.vocab(), "y x"))[0], std::log(1.0 / 3), 1e-15);
}

TEST(ToyLm, OrderBoundsTheSuffix) {
  auto table = ToyLmTable::empty(Vocabulary({"x", "y"}, std::string()), 1);
  table.entries.emplace(TokenSeq{0, 1}, TokenDistribution::from_probs({1.0, 0.0}));
  const ToyLm lm(table);
  EXPECT_EQ(lm.next_token_logprobs(ctx_of(lm.vocab(), "x y"))[0], std::log(0.5));
}

TEST(ToyLm, PureFunctionOfContext) {
  auto table = ToyLmTable::empty(Vocabulary({"<end>", "a", "b", "c"}), 3);
  table.set("a", {0.1, 0.2, 0.3, 0.4});
  table.set("a b", {0.25, 0.25, 0.25, 0.25});
  table.set("c c b", {0.7, 0.1, 0.1, 0.1});
  const ToyLm lm(table);
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<TokenId> tok(0, 3);
  for (int i = 0; i < 1000; ++i) {
    DialogueContext c;
    c.query.resize(gen() % 6);
    for (auto& t : c.query) t = tok(gen);
    c.prefix.resize(gen() % 4);
    for (auto& t : c.prefix) t = tok(gen);
    const auto first = lm.next_token_logprobs(c);
    ASSERT_EQ(values(first), values(lm.next_token_logprobs(c)));
    ASSERT_NEAR(logsumexp(first.values()), 0.0, 1e-6);
  }
}

TEST(Batch, EmptyIsAnError) {
  const auto lm = two_token_lm();
  EXPECT_THROW(lm.batch_next_token_logprobs({}), BatchEmpty);
}

TEST(Batch, MatchesSingleCallsInOrder) {
  const auto lm = two_token_lm();
  const std::vector<DialogueContext> ctxs{ctx_of(lm.vocab(), "s"), ctx_of(lm.vocab(), "a"),
                                          ctx_of(lm.vocab(), "s")};
  const auto rows = lm.batch_next_token_logprobs(ctxs);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(rows[i], lm.next_token_logprobs(ctxs[i]));
  EXPECT_EQ(rows[0], rows[2]);
}

TEST(Batch, BadTokenCarriesIndex) {
  const auto lm = two_token_lm();
  const std::vector<DialogueContext> ctxs{DialogueContext{{0}, {}, std::nullopt},
                                          DialogueContext{{0, 9}, {}, std::nullopt}};
  try {
    lm.batch_next_token_logprobs(ctxs);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_THAT(e.what(), HasSubstr("context 1"));
  }
}

TEST(Flatten, ReplaceAndAccompany) {
  const DialogueContext with_prompt{{5}, {6}, TokenSeq{3, 4}};
  const DialogueContext bare{{5}, {6}, std::nullopt};
  const ContextAssembly replace{PromptComposition::Replace, {1, 2}};
  const ContextAssembly accompany{PromptComposition::Accompany, {1, 2}};
  EXPECT_THAT(flatten(with_prompt, replace), ElementsAre(3, 4, 5, 6));
  EXPECT_THAT(flatten(bare, replace), ElementsAre(1, 2, 5, 6));
  EXPECT_THAT(flatten(with_prompt, accompany), ElementsAre(1, 2, 3, 4, 5, 6));
  EXPECT_THAT(flatten(bare, accompany), ElementsAre(1, 2, 5, 6));
  EXPECT_THAT(flatten(with_prompt), ElementsAre(3, 4, 5, 6));
}

TEST(ToyLmTable, JsonRoundTripAndValidation) {
  TempDir dir;
  auto table = ToyLmTable::empty(Vocabulary({"go", "stop"}, std::string("stop")), 2);
  table.set("go go", {0.25, 0.75});
  table.save(dir / "t.json");
  const auto back = ToyLmTable::load(dir / "t.json");
  EXPECT_EQ(back.order, 2);
  EXPECT_EQ(back.vocab, table.vocab);
  EXPECT_EQ(back.vocab.end_id(), 1);
  EXPECT_EQ(back.entries, table.entries);
  EXPECT_EQ(back.fallback, table.fallback);

  EXPECT_THROW(table.set("go", {1.0}), InvalidArgument);
  EXPECT_THROW(table.set("", {0.5, 0.5}), InvalidArgument);
  EXPECT_THROW(table.set("go", {0.5, 0.6}), NumericError);
  EXPECT_THROW(ToyLmTable::from_json(nlohmann::json::parse(R"({"order":0,"vocab":["a"],"entries":{}})")),
               InvalidArgument);
  EXPECT_THROW(ToyLmTable::from_json(nlohmann::json::parse(R"({"order":1,"vocab":["a"]})")),
               InvalidArgument);
  EXPECT_THROW(ToyLmTable::load(dir / "missing.json"), InvalidArgument);
}

ToyLm always_a() {
  auto table = ToyLmTable::empty(Vocabulary({"a", "b"}, std::string()), 1);
  table.fallback = TokenDistribution::from_probs({1.0, 0.0});
  return ToyLm(table);
}

TEST(Complete, ForcedTokenRepeats) {
  const auto lm = always_a();
  GenParams g;
  g.max_tokens = 3;
  EXPECT_EQ(lm.vocab().decode(complete(lm, ctx_of(lm.vocab(), "b"), g, 0)), "a a a");
}

TEST(Complete, ForcedEndStopsImmediately) {
  auto table = ToyLmTable::empty(Vocabulary({"<end>", "start", "x"}), 1);
  table.set("start", {1.0, 0.0, 0.0});
  const ToyLm lm(table);
  GenParams g;
  EXPECT_TRUE(complete(lm, ctx_of(lm.vocab(), "start"), g, 1).empty());
}

TEST(Complete, SeededDeterminism) {
  const ToyLm lm(ToyLmTable::empty(Vocabulary({"<end>", "a", "b", "c"}), 1));
  GenParams g;
  g.max_tokens = 30;
  const auto ctx = ctx_of(lm.vocab(), "a");
  EXPECT_EQ(complete(lm, ctx, g, 42), complete(lm, ctx, g, 42));
  bool differs = false;
  for (std::uint64_t s = 0; s < 10 && !differs; ++s) differs = complete(lm, ctx, g, s) != complete(lm, ctx, g, 42);
  EXPECT_TRUE(differs);
}

TEST(Complete, RejectsInvalidParams) {
  const auto lm = always_a();
  GenParams g;
  g.nucleus_p = 2.0;
  EXPECT_THROW(complete(lm, ctx_of(lm.vocab(), "a"), g, 0), InvalidArgument);
}

// --- remote --------------------------------------------------------------------------

ToyLm random_table_lm() {
  auto table = ToyLmTable::empty(Vocabulary({"<end>", "a", "b", "c", "d"}), 2);
  table.set("a", {0.1, 0.2, 0.3, 0.2, 0.2});
  table.set("a b", {0.5, 0.1, 0.1, 0.1, 0.2});
  table.set("d", {0.0, 0.0, 0.0, 0.0, 1.0});
  return ToyLm(table);
}

TEST(RemoteLm, MatchesLocalBackend) {
  const auto local = random_table_lm();
  LineServer server([&](std::string_view line) { return serve_logprobs(local, line); });
  const RemoteLm remote(server.endpoint(), local.vocab());
  std::vector<DialogueContext> ctxs;
  for (const char* q : {"a", "a b", "d", "c c", "b a b", "d a"}) ctxs.push_back(ctx_of(local.vocab(), q));
  const auto got = remote.batch_next_token_logprobs(ctxs);
  const auto want = local.batch_next_token_logprobs(ctxs);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_TRUE(close(got[i], want[i])) << i;
  EXPECT_EQ(values(remote.batch_next_token_logprobs(ctxs)[3]), values(got[3]));
}

TEST(RemoteLm, ConcurrentCallersGetTheirOwnReplies) {
  const auto local = random_table_lm();
  LineServer server([&](std::string_view line) { return serve_logprobs(local, line); });
  const RemoteLm remote(server.endpoint(), local.vocab());
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 20; ++i) {
        const auto c = ctx_of(local.vocab(), (t + i) % 2 ? "a b" : "d");
        if (!close(remote.next_token_logprobs(c), local.next_token_logprobs(c))) ++mismatches;
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(mismatches.load(), 0);
}

TEST(RemoteLm, RepliesMatchedByIdNotArrival) {
  const auto local = random_table_lm();
  auto listener = LineListener::bind();
  const Endpoint ep = listener.endpoint();
  std::thread srv([&] {
    auto sock = listener.accept();
    std::vector<std::string> lines;
    for (int i = 0; i < 3; ++i) lines.push_back(*sock->read_line());
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) sock->send_line(serve_logprobs(local, *it));
  });
  const RemoteLm remote(ep, local.vocab());
  const std::vector<DialogueContext> ctxs{ctx_of(local.vocab(), "a"), ctx_of(local.vocab(), "a b"),
                                          ctx_of(local.vocab(), "d")};
  const auto got = remote.batch_next_token_logprobs(ctxs);
  srv.join();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(close(got[i], local.next_token_logprobs(ctxs[i]))) << i;
}

TEST(RemoteLm, UnreachableServer) {
  std::uint16_t port;
  {
    auto l = LineListener::bind();
    port = l.port();
  }
  const RemoteLm remote(Endpoint{"127.0.0.1", port}, Vocabulary({"a", "b"}), {},
                        std::chrono::milliseconds(500));
  EXPECT_THROW(remote.next_token_logprobs(DialogueContext{{0}, {}, std::nullopt}), BackendUnavailable);
}

TEST(RemoteLm, MalformedReply) {
  LineServer server([](std::string_view) { return std::string("{\"id\": 1, \"logprobs\": oops"); });
  const RemoteLm remote(server.endpoint(), Vocabulary({"a", "b"}));
  EXPECT_THROW(remote.next_token_logprobs(DialogueContext{{0}, {}, std::nullopt}), ProtocolError);
}

TEST(RemoteLm, WrongLengthReply) {
  LineServer server([](std::string_view line) {
    return wire::encode(wire::LogprobsReply{wire::message_id(wire::decode(line)), {0.0}});
  });
  const RemoteLm remote(server.endpoint(), Vocabulary({"a", "b"}));
  EXPECT_THROW(remote.next_token_logprobs(DialogueContext{{0}, {}, std::nullopt}), ProtocolError);
}

TEST(RemoteLm, ServerErrorIsBackendUnavailable) {
  const auto local = random_table_lm();
  LineServer server([&](std::string_view line) { return serve_logprobs(local, line); });
  const RemoteLm remote(server.endpoint(), Vocabulary({"<end>", "a", "b", "c", "d", "extra"}));
  try {
    remote.next_token_logprobs(DialogueContext{{5}, {}, std::nullopt});
    FAIL() << "expected BackendUnavailable";
  } catch (const BackendUnavailable& e) {
    EXPECT_THAT(e.what(), HasSubstr("outside"));
  }
}

TEST(ServeLogprobs, RejectsOtherOps) {
  const auto local = random_table_lm();
  const auto reply = wire::decode(serve_logprobs(local, R"({"id":4,"op":"complete_text","prompt":""})"));
  ASSERT_TRUE(std::holds_alternative<wire::ErrorReply>(reply));
  EXPECT_EQ(wire::message_id(reply), 4u);
  EXPECT_TRUE(std::holds_alternative<wire::ErrorReply>(wire::decode(serve_logprobs(local, "garbage"))));
}

TEST(RemoteReward, RoundTripsThroughScorer) {
  const Vocabulary vocab({"a", "b"});
  const LexicalReward verbose(LexicalRewardSpec{"verbose", {{"a", 1.0}}, 0.5}, vocab);
  const RewardModel* models[] = {&verbose};
  LineServer server([&](std::string_view line) { return serve_scores(models, line); });
  const RemoteReward remote("verbose", server.endpoint());
  const std::vector<TokenSeq> responses{{0, 0}, {1}, {}};
  EXPECT_THAT(remote.score_batch({}, responses), ElementsAre(3.0, 0.5, 0.0));
  EXPECT_EQ(remote.score({}, {0}), 1.5);
  const RemoteReward unknown("other", server.endpoint());
  EXPECT_THROW(unknown.score({}, {0}), ScorerUnavailable);
}

TEST(RemoteReward, UnreachableIsScorerUnavailable) {
  std::uint16_t port;
  {
    auto l = LineListener::bind();
    port = l.port();
  }
  const RemoteReward remote("x", Endpoint{"127.0.0.1", port}, std::chrono::milliseconds(500));
  EXPECT_THROW(remote.score({}, {0}), ScorerUnavailable);
}

TEST(Endpoint, Parse) {
  EXPECT_EQ(Endpoint::parse("localhost:8080"), (Endpoint{"localhost", 8080}));
  EXPECT_EQ(Endpoint::parse("127.0.0.1:1").to_string(), "127.0.0.1:1");
  EXPECT_THROW(Endpoint::parse("localhost"), InvalidArgument);
  EXPECT_THROW(Endpoint::parse("h:70000"), InvalidArgument);
  EXPECT_THROW(Endpoint::parse("h:abc"), InvalidArgument);
}

}  // namespace
