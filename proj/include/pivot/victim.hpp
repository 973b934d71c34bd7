#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pivot {

using Label = std::int64_t;
using Tokens = std::vector<std::string>;

// Reserved unknown-token symbol used for masking.
inline constexpr std::string_view kMaskToken = "[UNK]";

// A hard-label answer. std::nullopt means the victim refused to answer.
using Response = std::optional<Label>;

class Victim {
 public:
  virtual ~Victim() = default;
  virtual Response classify(std::span<const std::string> tokens) = 0;
};

// The meter is spent. Distinct from VictimError so callers can tell a normal
// budget stop from a broken victim.
class BudgetExhausted : public std::runtime_error {
 public:
  BudgetExhausted() : std::runtime_error("query budget exhausted") {}
};

// Transport or protocol failure talking to a victim.
class VictimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedResponse : public VictimError {
 public:
  using VictimError::VictimError;
};

enum class QueryPhase { clean, pivot, perturbation };

const char* to_string(QueryPhase phase);

struct AuditEntry {
  Tokens tokens;
  Response label;
  QueryPhase phase = QueryPhase::clean;
  // The victim threw while answering; the query still counts.
  bool failed = false;
};

// Budget-metered hard-label oracle. The guard check and the increment happen
// under one lock, so concurrent helpers of one attack cannot overshoot the
// budget. Every accepted query is appended to the audit log, so
// used() == audit_log().size() always.
class VictimOracle {
 public:
  VictimOracle(std::shared_ptr<Victim> victim, std::uint64_t budget);

  // Throws BudgetExhausted before dispatch when used() == budget().
  // Exceptions from the victim propagate after the query is logged.
  Response query(std::span<const std::string> tokens);

  std::uint64_t budget() const { return budget_; }
  std::uint64_t used() const;
  std::uint64_t remaining() const;

  void set_phase(QueryPhase phase);
  QueryPhase phase() const;

  std::vector<AuditEntry> audit_log() const;

 private:
  std::shared_ptr<Victim> victim_;
  std::uint64_t budget_;
  mutable std::mutex mutex_;
  std::uint64_t used_ = 0;
  QueryPhase phase_ = QueryPhase::clean;
  std::vector<AuditEntry> log_;
};

// Label `label_if_present` iff every decisive token occurs verbatim.
struct KeywordRule {
  std::vector<std::string> decisive;
  Label label_if_present = 1;
  Label label_otherwise = 0;
};

// Label `positive` iff bias + sum of token weights > 0, `negative` otherwise.
// Tokens without a weight (and the mask symbol) contribute 0.
struct WeightedBagRule {
  std::map<std::string, std::int64_t, std::less<>> weights;
  std::int64_t bias = 0;
  Label positive = 1;
  Label negative = 0;
};

// Deterministic victims with exactly known behaviour, used for verification.
class RuleVictim : public Victim {
 public:
  explicit RuleVictim(KeywordRule rule);
  explicit RuleVictim(WeightedBagRule rule);

  Response classify(std::span<const std::string> tokens) override;
  Label label(std::span<const std::string> tokens) const;

  const std::variant<KeywordRule, WeightedBagRule>& rule() const { return rule_; }

 private:
  std::variant<KeywordRule, WeightedBagRule> rule_;
};

struct RemoteVictimConfig {
  // http://host[:port][/path]
  std::string endpoint;
  int timeout_ms = 10000;
  int retries = 2;
  std::string label_field = "label";
  std::string bearer_token;
};

// POSTs {"text": "<tokens joined by single spaces>"} as application/json and
// reads an integer label field from the JSON reply. A null label field is a
// refusal. Non-2xx replies and connection failures are retried; after the
// last attempt they surface as VictimError, never as a label.
class RemoteVictim : public Victim {
 public:
  explicit RemoteVictim(RemoteVictimConfig config);

  Response classify(std::span<const std::string> tokens) override;

  const RemoteVictimConfig& config() const { return config_; }

 private:
  RemoteVictimConfig config_;
  std::string base_;
  std::string path_;
};

// Single-space join, the inverse of whitespace tokenization.
std::string detokenize(std::span<const std::string> tokens);

// Splits on runs of ASCII whitespace.
Tokens tokenize(std::string_view text);

// Parses a reply body. Exposed for tests of the wire format.
Response parse_label_response(std::string_view body, const std::string& label_field);

std::string make_request_body(std::span<const std::string> tokens);

}  // namespace pivot
