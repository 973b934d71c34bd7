#include "pivot/victim.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <json.hpp>
#include <set>
#include <thread>

#include "test_support.hpp"

namespace pivot {
namespace {

using testing::keyword_victim;

TEST(Tokenize, WhitespaceRoundTrip) {
  EXPECT_EQ(tokenize("  a fine\tfilm \n"), (Tokens{"a", "fine", "film"}));
  EXPECT_TRUE(tokenize("   ").empty());
  EXPECT_EQ(detokenize(Tokens{"a", "fine", "film"}), "a fine film");
}

TEST(VictimOracle, KeywordVictimAndMeter) {
  VictimOracle oracle(keyword_victim({"great"}), 3);
  EXPECT_EQ(oracle.query(Tokens{"a", "great", "film"}), Response{1});
  EXPECT_EQ(oracle.used(), 1u);
  EXPECT_EQ(oracle.query(Tokens{"a", "[UNK]", "film"}), Response{0});
  EXPECT_EQ(oracle.used(), 2u);
  EXPECT_EQ(oracle.remaining(), 1u);
}

TEST(VictimOracle, ExhaustedMeterRejectsBeforeDispatch) {
  auto victim = std::make_shared<testing::ConstantVictim>(1);
  VictimOracle oracle(victim, 1);
  oracle.query(Tokens{"x"});
  EXPECT_THROW(oracle.query(Tokens{"x"}), BudgetExhausted);
  EXPECT_EQ(oracle.used(), 1u);
  EXPECT_EQ(oracle.audit_log().size(), 1u);
}

TEST(VictimOracle, AuditLogRecordsPhaseAndLabel) {
  VictimOracle oracle(keyword_victim({"great"}), 10);
  oracle.set_phase(QueryPhase::pivot);
  oracle.query(Tokens{"great"});
  oracle.set_phase(QueryPhase::perturbation);
  oracle.query(Tokens{"fine"});
  const auto log = oracle.audit_log();
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[0].phase, QueryPhase::pivot);
  EXPECT_EQ(log[0].label, Response{1});
  EXPECT_EQ(log[1].phase, QueryPhase::perturbation);
  EXPECT_EQ(log[1].tokens, Tokens{"fine"});
}

TEST(VictimOracle, ConcurrentQueriesNeverOvershoot) {
  auto victim = std::make_shared<testing::ConstantVictim>(0);
  VictimOracle oracle(victim, 1000);
  std::atomic<int> accepted{0}, rejected{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 400; ++i) {
        try {
          oracle.query(Tokens{"x"});
          ++accepted;
        } catch (const BudgetExhausted&) {
          ++rejected;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(accepted.load(), 1000);
  EXPECT_EQ(rejected.load(), 600);
  EXPECT_EQ(oracle.used(), 1000u);
  EXPECT_EQ(oracle.audit_log().size(), 1000u);
}

TEST(RuleVictim, KeywordNeedsAllDecisiveTokens) {
  RuleVictim v(KeywordRule{{"great", "film"}, 1, 0});
  EXPECT_EQ(v.label(Tokens{"great", "film"}), 1);
  EXPECT_EQ(v.label(Tokens{"great", "movie"}), 0);
  EXPECT_THROW(RuleVictim(KeywordRule{{}, 1, 0}), std::invalid_argument);
}

TEST(RuleVictim, WeightedBagSignThreshold) {
  WeightedBagRule rule;
  rule.weights = {{"good", 3}, {"bad", -4}, {"[UNK]", 100}};
  rule.bias = -1;
  RuleVictim v(rule);
  EXPECT_EQ(v.label(Tokens{"good", "film"}), 1);       // 3 - 1 > 0
  EXPECT_EQ(v.label(Tokens{"good", "bad"}), 0);        // -2
  EXPECT_EQ(v.label(Tokens{"film"}), 0);               // bias only
  EXPECT_EQ(v.label(Tokens{"[UNK]", "[UNK]"}), 0);     // mask weighs nothing
}

TEST(RuleVictim, PureUnderRepetition) {
  auto v = keyword_victim({"great"});
  const Tokens t{"a", "great", "film"};
  std::set<Label> seen;
  for (int i = 0; i < 10000; ++i) seen.insert(*v->classify(t));
  EXPECT_EQ(seen.size(), 1u);
}

TEST(WireFormat, RequestBodyIsTextObject) {
  const auto body = nlohmann::json::parse(make_request_body(Tokens{"a", "b\"c"}));
  EXPECT_EQ(body, (nlohmann::json{{"text", "a b\"c"}}));
}

TEST(WireFormat, ParseLabel) {
  EXPECT_EQ(parse_label_response(R"({"label": 1})", "label"), Response{1});
  EXPECT_EQ(parse_label_response(R"({"cls": 3, "label": 0})", "cls"), Response{3});
  EXPECT_EQ(parse_label_response(R"({"label": null})", "label"), std::nullopt);
  EXPECT_THROW(parse_label_response(R"({"label": "pos"})", "label"), MalformedResponse);
  EXPECT_THROW(parse_label_response(R"({"label": 1.5})", "label"), MalformedResponse);
  EXPECT_THROW(parse_label_response(R"({"other": 1})", "label"), MalformedResponse);
  EXPECT_THROW(parse_label_response("not json", "label"), MalformedResponse);
  EXPECT_THROW(parse_label_response("[1]", "label"), MalformedResponse);
}

// In-process stub server on an ephemeral port.
class StubServer {
 public:
  explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/classify", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/classify"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(RemoteVictim, EchoStubReturnsLabel) {
  std::string seen_body, seen_type, seen_auth;
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    seen_body = req.body;
    seen_type = req.get_header_value("Content-Type");
    seen_auth = req.get_header_value("Authorization");
    res.set_content(R"({"label": 1})", "application/json");
  });
  RemoteVictim v({stub.url(), 2000, 0, "label", "secret"});
  EXPECT_EQ(v.classify(Tokens{"a", "fine", "film"}), Response{1});
  EXPECT_EQ(nlohmann::json::parse(seen_body), (nlohmann::json{{"text", "a fine film"}}));
  EXPECT_EQ(seen_type, "application/json");
  EXPECT_EQ(seen_auth, "Bearer secret");
}

TEST(RemoteVictim, NonIntegerLabelIsMalformed) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"label": "pos"})", "application/json");
  });
  RemoteVictim v({stub.url(), 2000, 0, "label", ""});
  EXPECT_THROW(v.classify(Tokens{"x"}), MalformedResponse);
}

TEST(RemoteVictim, Non2xxRetriedThenTransportError) {
  std::atomic<int> hits{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  RemoteVictim v({stub.url(), 2000, 2, "label", ""});
  try {
    v.classify(Tokens{"x"});
    FAIL() << "expected VictimError";
  } catch (const MalformedResponse&) {
    FAIL() << "status errors are transport errors";
  } catch (const VictimError&) {
  }
  EXPECT_EQ(hits.load(), 3);
}

TEST(RemoteVictim, UnreachableEndpointFailsAfterAllAttempts) {
  // Bind then release a port so nothing listens on it.
  int port;
  {
    httplib::Server s;
    port = s.bind_to_any_port("127.0.0.1");
  }
  RemoteVictim v({"http://127.0.0.1:" + std::to_string(port) + "/x", 300, 2, "label", ""});
  try {
    v.classify(Tokens{"x"});
    FAIL() << "expected VictimError";
  } catch (const VictimError& e) {
    EXPECT_NE(std::string(e.what()).find("3 attempts"), std::string::npos) << e.what();
  }
}

TEST(RemoteVictim, NoRequestOnceMeterIsExhausted) {
  std::atomic<int> hits{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.set_content(R"({"label": 0})", "application/json");
  });
  VictimOracle oracle(std::make_shared<RemoteVictim>(RemoteVictimConfig{stub.url(), 2000, 0, "label", ""}), 2);
  oracle.query(Tokens{"a"});
  oracle.query(Tokens{"b"});
  EXPECT_THROW(oracle.query(Tokens{"c"}), BudgetExhausted);
  EXPECT_EQ(hits.load(), 2);
}

TEST(RemoteVictim, RejectsBadEndpoints) {
  EXPECT_THROW(RemoteVictim({"https://example.com", 1000, 0, "label", ""}), std::invalid_argument);
  EXPECT_THROW(RemoteVictim({"http://", 1000, 0, "label", ""}), std::invalid_argument);
}

}  // namespace
}  // namespace pivot
