#pragma once

// Pivot Set identification: culling of non-actionable inputs, then greedy
// one-token expansion where each round is a KL-LUCB bandit over candidate
// sets, bounded by the gamma*B query quota.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pivot/bandit.hpp"
#include "pivot/config.hpp"
#include "pivot/random.hpp"
#include "pivot/victim.hpp"

namespace pivot {

// Sorted, duplicate-free token positions.
using IndexSet = std::vector<std::size_t>;

// A tokenized input together with the label the victim assigns it.
class TokenSequence {
 public:
  // Throws std::invalid_argument on an empty list or a token equal to the
  // mask symbol.
  TokenSequence(Tokens tokens, Label original_label);

  const Tokens& tokens() const { return tokens_; }
  const std::string& operator[](std::size_t i) const { return tokens_[i]; }
  Label original_label() const { return label_; }
  std::size_t length() const { return tokens_.size(); }

 private:
  Tokens tokens_;
  Label label_;
};

// D(z | S): keep every token in `preserved`, mask each other token
// independently with `mask_probability`.
struct MaskingDistribution {
  const TokenSequence* base = nullptr;
  IndexSet preserved;
  double mask_probability = 0.5;
  std::string mask_symbol{kMaskToken};
};

Tokens sample_masked(const MaskingDistribution& dist, Rng& rng);

struct PivotCandidate {
  IndexSet indices;
  // The position this candidate added to its parent set.
  std::size_t added = 0;
  ArmState arm;
};

struct CullResult {
  bool culled = false;
  double p0 = 0.0;
  double p0_lb = 0.0;
  std::uint64_t samples = 0;
  // Fewer than N queries were available, so no check ran.
  bool insufficient_budget = false;
  // The oracle ran dry part-way; p0 and p0_lb cover the samples drawn.
  bool budget_exhausted = false;
};

// Draws N fully-masked variants (S = empty), p0 = fraction keeping the label,
// p0_lb = KL lower bound with beta0 = -log(delta). Culled iff
// p0_lb >= cull_threshold. `query_limit` caps the queries this may spend.
CullResult cull_check(const TokenSequence& x, VictimOracle& oracle, const AttackConfig& cfg,
                      Rng& rng, std::uint64_t query_limit = UINT64_MAX);

// One candidate per position absent from `current`, in ascending order of
// the added position, each with a fresh zero-pull arm.
std::vector<PivotCandidate> generate_candidates(const PivotCandidate& current,
                                                const TokenSequence& x);

struct PivotResult {
  IndexSet pivot;
  // Pivot positions in the order the search added them.
  std::vector<std::size_t> pivot_order;
  bool culled = false;
  // Final round's losing candidates, by descending estimate then position.
  std::vector<std::size_t> ranked_non_pivot;
  std::uint64_t queries_used = 0;
  // Retention-precision estimate of the returned set (0 when empty).
  double estimate = 0.0;
  std::size_t rounds = 0;
  Verdict verdict = Verdict::inconclusive;
  CullResult cull;
};

// Runs in QueryPhase::pivot and spends at most ceil(gamma*B) + N queries
// (the last initialization batch may straddle the quota).
PivotResult find_pivot(const TokenSequence& x, VictimOracle& oracle, const AttackConfig& cfg,
                       Rng& rng);

}  // namespace pivot
