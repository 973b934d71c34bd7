#pragma once

// KL-LUCB machinery for Bernoulli arms: divergence, confidence bounds, the
// exploration rate and the two sampling loops used by the pivot search.
// Nothing in here knows about text.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace pivot {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Bernoulli KL divergence d(p, q). Returns kInfinity when q sits on an
// endpoint that p does not. Throws std::domain_error outside [0, 1].
double bernoulli_kl(double p, double q);

// Largest q in [estimate, 1] with d(estimate, q) <= beta / pulls.
double kl_upper_bound(double estimate, std::uint64_t pulls, double beta);

// Smallest q in [0, estimate] with d(estimate, q) <= beta / pulls.
double kl_lower_bound(double estimate, std::uint64_t pulls, double beta);

struct ExplorationParams {
  double lambda = 1.0;
  double alpha = 1.1;
  double delta = 0.85;
  double epsilon = 0.9;

  // Throws std::invalid_argument naming the first bad field.
  void validate() const;
};

// beta(K, t) = log(lambda K t^alpha / delta) + log log(lambda K t^alpha / delta).
// Throws std::domain_error when the inner quantity is <= e.
double exploration_rate(std::uint64_t num_arms, std::uint64_t round,
                        const ExplorationParams& params);

// Same as exploration_rate, but an inner quantity <= e is clamped to
// e * (1 + 1e-9) and *clamped is set. The sampling loops use this one (and
// warn once per loop), since the default lambda/delta leave beta undefined
// for one or two arms.
double clamped_exploration_rate(std::uint64_t num_arms, std::uint64_t round,
                                const ExplorationParams& params, bool* clamped = nullptr);

struct ArmState {
  std::uint64_t pulls = 0;
  std::uint64_t successes = 0;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 1.0;

  static ArmState from_counts(std::uint64_t pulls, std::uint64_t successes, double beta);

  void record(bool success);
  // Recomputes estimate and bounds from the counts. An unpulled arm gets
  // estimate 0 with bounds (0, 1).
  void refresh(double beta);
};

// One binary trial source. In the attack each pull costs one victim query.
class BernoulliSampler {
 public:
  virtual ~BernoulliSampler() = default;
  virtual bool pull() = 0;
};

struct BestCandidateResult {
  std::size_t index = 0;
  std::vector<ArmState> arms;
  std::uint64_t pulls = 0;
  // Last round counter used for beta; the next round is rounds + 1.
  std::uint64_t rounds = 0;
};

// KL-LUCB epsilon-best arm identification. Each round pulls the leader (the
// best estimate) and the challenger (highest upper bound among the other
// arms), then stops once leader.lower >= challenger.upper - epsilon or the
// pull budget runs out. The returned index maximizes
// (estimate, lower, -index).
BestCandidateResult best_candidate(std::span<BernoulliSampler* const> arms,
                                   std::vector<ArmState> initial, double threshold,
                                   const ExplorationParams& params,
                                   std::uint64_t pull_budget);

enum class Verdict { valid, invalid, inconclusive };

const char* to_string(Verdict v);

struct VerifyResult {
  Verdict verdict = Verdict::inconclusive;
  ArmState state;
  std::uint64_t pulls = 0;
};

// Pulls one arm until lower >= threshold (valid), upper < threshold
// (invalid), or the budget is gone (inconclusive). num_arms and first_round
// place the arm inside the bandit instance it came from, for beta.
VerifyResult verify_threshold(BernoulliSampler& arm, ArmState state, double threshold,
                              const ExplorationParams& params, std::uint64_t pull_budget,
                              std::uint64_t num_arms = 1, std::uint64_t first_round = 1);

}  // namespace pivot
