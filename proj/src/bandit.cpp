#include "pivot/bandit.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "pivot/log.hpp"

namespace pivot {
namespace {

constexpr int kMaxBisectionSteps = 100;

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    std::ostringstream os;
    os << what << " must lie in [0, 1], got " << p;
    throw std::domain_error(os.str());
  }
}

double radius(double estimate, std::uint64_t pulls, double beta) {
  check_probability(estimate, "estimate");
  if (pulls == 0) throw std::domain_error("confidence bound needs at least one pull");
  if (!(beta >= 0.0)) throw std::domain_error("beta must be non-negative");
  return beta / static_cast<double>(pulls);
}

// `inside` is the end of the bracket where d <= r holds. Runs until the
// bracket stops shrinking in floating point, which is well below the 1e-9
// contract, and returns the last point known to satisfy the constraint.
double bisect(double estimate, double inside, double outside, double r) {
  for (int i = 0; i < kMaxBisectionSteps; ++i) {
    const double mid = 0.5 * (inside + outside);
    if (mid == inside || mid == outside) break;
    if (bernoulli_kl(estimate, mid) <= r) {
      inside = mid;
    } else {
      outside = mid;
    }
  }
  return inside;
}

double log_inner(std::uint64_t num_arms, std::uint64_t round, const ExplorationParams& params) {
  if (num_arms == 0) throw std::domain_error("exploration rate needs at least one arm");
  if (round == 0) throw std::domain_error("exploration rate round counter starts at 1");
  params.validate();
  return std::log(params.lambda) + std::log(static_cast<double>(num_arms)) +
         params.alpha * std::log(static_cast<double>(round)) - std::log(params.delta);
}

double warned_rate(std::uint64_t num_arms, std::uint64_t round, const ExplorationParams& params,
                   bool& warned) {
  bool clamped = false;
  const double beta = clamped_exploration_rate(num_arms, round, params, &clamped);
  if (clamped && !warned) {
    warned = true;
    std::ostringstream os;
    os << "exploration rate clamped for K=" << num_arms << " t=" << round
       << " (lambda=" << params.lambda << ", delta=" << params.delta << ")";
    log::warn(os.str());
  }
  return beta;
}

// (estimate, lower, -index) ordering.
bool better_arm(const std::vector<ArmState>& arms, std::size_t a, std::size_t b) {
  if (arms[a].estimate != arms[b].estimate) return arms[a].estimate > arms[b].estimate;
  if (arms[a].lower != arms[b].lower) return arms[a].lower > arms[b].lower;
  return a < b;
}

std::size_t best_by_estimate(const std::vector<ArmState>& arms) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < arms.size(); ++i) {
    if (better_arm(arms, i, best)) best = i;
  }
  return best;
}

}  // namespace

double bernoulli_kl(double p, double q) {
  check_probability(p, "p");
  check_probability(q, "q");
  if (p == q) return 0.0;
  if (q == 0.0 || q == 1.0) return kInfinity;
  double d = 0.0;
  if (p > 0.0) d += p * std::log(p / q);
  if (p < 1.0) d += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
  // Rounding can push d a hair below zero when p and q are adjacent doubles.
  return d > 0.0 ? d : 0.0;
}

double kl_upper_bound(double estimate, std::uint64_t pulls, double beta) {
  const double r = radius(estimate, pulls, beta);
  if (r == 0.0 || estimate == 1.0) return estimate;
  return bisect(estimate, estimate, 1.0, r);
}

double kl_lower_bound(double estimate, std::uint64_t pulls, double beta) {
  const double r = radius(estimate, pulls, beta);
  if (r == 0.0 || estimate == 0.0) return estimate;
  return bisect(estimate, estimate, 0.0, r);
}

void ExplorationParams::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  if (!(alpha > 1.0)) throw std::invalid_argument("alpha must be > 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
}

double exploration_rate(std::uint64_t num_arms, std::uint64_t round,
                        const ExplorationParams& params) {
  const double li = log_inner(num_arms, round, params);
  if (!(li > 1.0)) {
    std::ostringstream os;
    os << "exploration rate undefined: lambda*K*t^alpha/delta <= e for K=" << num_arms
       << " t=" << round << " lambda=" << params.lambda << " alpha=" << params.alpha
       << " delta=" << params.delta;
    throw std::domain_error(os.str());
  }
  return li + std::log(li);
}

double clamped_exploration_rate(std::uint64_t num_arms, std::uint64_t round,
                                const ExplorationParams& params, bool* clamped) {
  double li = log_inner(num_arms, round, params);
  const bool clamp = !(li > 1.0);
  if (clamp) li = 1.0 + std::log1p(1e-9);
  if (clamped) *clamped = clamp;
  return li + std::log(li);
}

ArmState ArmState::from_counts(std::uint64_t pulls, std::uint64_t successes, double beta) {
  if (successes > pulls) throw std::invalid_argument("successes exceed pulls");
  ArmState s;
  s.pulls = pulls;
  s.successes = successes;
  s.refresh(beta);
  return s;
}

void ArmState::record(bool success) {
  ++pulls;
  if (success) ++successes;
}

void ArmState::refresh(double beta) {
  if (successes > pulls) throw std::invalid_argument("successes exceed pulls");
  if (pulls == 0) {
    estimate = 0.0;
    lower = 0.0;
    upper = 1.0;
    return;
  }
  estimate = static_cast<double>(successes) / static_cast<double>(pulls);
  lower = kl_lower_bound(estimate, pulls, beta);
  upper = kl_upper_bound(estimate, pulls, beta);
}

BestCandidateResult best_candidate(std::span<BernoulliSampler* const> arms,
                                   std::vector<ArmState> initial, double threshold,
                                   const ExplorationParams& params,
                                   std::uint64_t pull_budget) {
  if (arms.empty()) throw std::invalid_argument("best_candidate needs at least one arm");
  if (initial.size() != arms.size()) {
    throw std::invalid_argument("best_candidate: one initial state per arm required");
  }
  params.validate();

  BestCandidateResult out;
  out.arms = std::move(initial);
  const std::uint64_t k = arms.size();
  bool warned = false;
  std::uint64_t round = 1;
  auto refresh_all = [&] {
    const double beta = warned_rate(k, round, params, warned);
    for (auto& a : out.arms) a.refresh(beta);
  };
  refresh_all();
  out.rounds = round;
  if (k == 1) return out;

  while (true) {
    // The best arm of S+ is the best estimate overall whenever S+ is
    // non-empty, and the overall best is also the fallback when it is empty.
    const std::size_t leader = best_by_estimate(out.arms);

    // Challenger: highest upper bound in S- (estimate < threshold), or among
    // all other arms when S- holds nothing but the leader.
    std::size_t challenger = out.arms.size();
    for (int pass = 0; pass < 2 && challenger == out.arms.size(); ++pass) {
      for (std::size_t i = 0; i < out.arms.size(); ++i) {
        if (i == leader) continue;
        if (pass == 0 && out.arms[i].estimate >= threshold) continue;
        if (challenger == out.arms.size() || out.arms[i].upper > out.arms[challenger].upper) {
          challenger = i;
        }
      }
    }

    if (out.arms[leader].lower >= out.arms[challenger].upper - params.epsilon) break;
    if (out.pulls >= pull_budget) break;

    out.arms[leader].record(arms[leader]->pull());
    ++out.pulls;
    if (out.pulls < pull_budget) {
      out.arms[challenger].record(arms[challenger]->pull());
      ++out.pulls;
    }
    ++round;
    refresh_all();
    out.rounds = round;
  }

  out.index = best_by_estimate(out.arms);
  return out;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::valid:
      return "valid";
    case Verdict::invalid:
      return "invalid";
    case Verdict::inconclusive:
      return "inconclusive";
  }
  return "unknown";
}

VerifyResult verify_threshold(BernoulliSampler& arm, ArmState state, double threshold,
                              const ExplorationParams& params, std::uint64_t pull_budget,
                              std::uint64_t num_arms, std::uint64_t first_round) {
  params.validate();
  bool warned = false;
  std::uint64_t round = first_round;
  state.refresh(warned_rate(num_arms, round, params, warned));

  VerifyResult out;
  while (true) {
    if (state.pulls > 0 && state.lower >= threshold) {
      out.verdict = Verdict::valid;
      break;
    }
    if (state.pulls > 0 && state.upper < threshold) {
      out.verdict = Verdict::invalid;
      break;
    }
    if (out.pulls >= pull_budget) {
      out.verdict = Verdict::inconclusive;
      break;
    }
    state.record(arm.pull());
    ++out.pulls;
    ++round;
    state.refresh(warned_rate(num_arms, round, params, warned));
  }
  out.state = state;
  return out;
}

}  // namespace pivot
