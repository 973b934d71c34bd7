#include "pivot/pivot_search.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "pivot/log.hpp"

namespace pivot {
namespace {

// One arm of the pivot bandit: every pull masks the input outside the
// candidate set and asks the victim whether the label survived. Refusals
// count as not preserved.
class MaskedQuerySampler : public BernoulliSampler {
 public:
  MaskedQuerySampler(const TokenSequence& x, IndexSet preserved, VictimOracle& oracle,
                     const AttackConfig& cfg, Rng& rng)
      : dist_{&x, std::move(preserved), cfg.mask_probability}, oracle_(oracle), rng_(rng) {}

  bool pull() override {
    const Tokens z = sample_masked(dist_, rng_);
    const Response r = oracle_.query(z);
    return r.has_value() && *r == dist_.base->original_label();
  }

 private:
  MaskingDistribution dist_;
  VictimOracle& oracle_;
  Rng& rng_;
};

bool better(const PivotCandidate& a, const PivotCandidate& b) {
  if (a.arm.estimate != b.arm.estimate) return a.arm.estimate > b.arm.estimate;
  if (a.arm.lower != b.arm.lower) return a.arm.lower > b.arm.lower;
  return a.added < b.added;
}

constexpr std::size_t kNoWinner = static_cast<std::size_t>(-1);

std::vector<std::size_t> rank_losers(const std::vector<PivotCandidate>& round, std::size_t winner) {
  std::vector<const PivotCandidate*> losers;
  for (std::size_t i = 0; i < round.size(); ++i) {
    if (i == winner) continue;
    losers.push_back(&round[i]);
  }
  std::stable_sort(losers.begin(), losers.end(), [](const auto* a, const auto* b) {
    if (a->arm.estimate != b->arm.estimate) return a->arm.estimate > b->arm.estimate;
    return a->added < b->added;
  });
  std::vector<std::size_t> out;
  for (const auto* c : losers) out.push_back(c->added);
  return out;
}

}  // namespace

TokenSequence::TokenSequence(Tokens tokens, Label original_label)
    : tokens_(std::move(tokens)), label_(original_label) {
  if (tokens_.empty()) throw std::invalid_argument("token sequence must not be empty");
  for (const auto& t : tokens_) {
    if (t == kMaskToken) {
      throw std::invalid_argument("token sequence contains the reserved mask symbol");
    }
  }
}

Tokens sample_masked(const MaskingDistribution& dist, Rng& rng) {
  if (!dist.base) throw std::invalid_argument("masking distribution has no base sequence");
  const Tokens& base = dist.base->tokens();
  std::vector<char> keep(base.size(), 0);
  for (std::size_t i : dist.preserved) {
    if (i >= base.size()) throw std::out_of_range("preserved index outside the sequence");
    keep[i] = 1;
  }
  Tokens z = base;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!keep[i] && bernoulli(rng, dist.mask_probability)) z[i] = dist.mask_symbol;
  }
  return z;
}

CullResult cull_check(const TokenSequence& x, VictimOracle& oracle, const AttackConfig& cfg,
                      Rng& rng, std::uint64_t query_limit) {
  CullResult out;
  const std::uint64_t n = cfg.init_samples;
  if (std::min(query_limit, oracle.remaining()) < n) {
    out.insufficient_budget = true;
    log::warn("culling skipped: fewer than " + std::to_string(n) + " queries available");
    return out;
  }
  MaskedQuerySampler sampler(x, {}, oracle, cfg, rng);
  std::uint64_t kept = 0;
  try {
    for (std::uint64_t i = 0; i < n; ++i) {
      if (sampler.pull()) ++kept;
      ++out.samples;
    }
  } catch (const BudgetExhausted&) {
    out.budget_exhausted = true;
  }
  if (out.samples == 0) return out;
  out.p0 = static_cast<double>(kept) / static_cast<double>(out.samples);
  out.p0_lb = kl_lower_bound(out.p0, out.samples, -std::log(cfg.delta));
  out.culled = !out.budget_exhausted && out.p0_lb >= cfg.cull_threshold;
  return out;
}

std::vector<PivotCandidate> generate_candidates(const PivotCandidate& current,
                                                const TokenSequence& x) {
  std::vector<char> member(x.length(), 0);
  for (std::size_t i : current.indices) {
    if (i >= x.length()) throw std::out_of_range("candidate index outside the sequence");
    member[i] = 1;
  }
  std::vector<PivotCandidate> out;
  for (std::size_t i = 0; i < x.length(); ++i) {
    if (member[i]) continue;
    PivotCandidate c;
    c.indices = current.indices;
    c.indices.insert(std::upper_bound(c.indices.begin(), c.indices.end(), i), i);
    c.added = i;
    out.push_back(std::move(c));
  }
  return out;
}

PivotResult find_pivot(const TokenSequence& x, VictimOracle& oracle, const AttackConfig& cfg,
                       Rng& rng) {
  cfg.validate();
  oracle.set_phase(QueryPhase::pivot);
  const ExplorationParams params = cfg.exploration();
  const std::uint64_t start = oracle.used();
  const std::uint64_t limit = std::min(cfg.pivot_quota(), oracle.remaining());
  auto spent = [&] { return oracle.used() - start; };
  auto left = [&] { return limit > spent() ? limit - spent() : std::uint64_t{0}; };

  PivotResult result;
  result.cull = cull_check(x, oracle, cfg, rng, limit);
  if (result.cull.culled) {
    result.culled = true;
    result.queries_used = spent();
    return result;
  }

  PivotCandidate current;
  bool have_current = false;
  // Most recent round in which at least one arm was pulled, for the fallback
  // ranking of non-pivot positions.
  std::vector<PivotCandidate> ranked_round;
  std::size_t ranked_winner = kNoWinner;

  auto adopt = [&](std::vector<PivotCandidate>& round, std::size_t w) {
    current = round[w];
    have_current = true;
    result.pivot_order.push_back(round[w].added);
    ranked_round = round;
    ranked_winner = w;
  };

  try {
    while (true) {
      std::vector<PivotCandidate> round = generate_candidates(current, x);
      if (round.empty()) break;
      ++result.rounds;
      const std::uint64_t k = round.size();

      std::vector<MaskedQuerySampler> samplers;
      samplers.reserve(round.size());
      for (const auto& c : round) samplers.emplace_back(x, c.indices, oracle, cfg, rng);

      // Fresh N-sample initialization per arm. A batch starts only while the
      // quota has room, then runs to completion.
      bool initialized = true;
      bool any_pulled = false;
      const double beta1 = clamped_exploration_rate(k, 1, params);
      for (std::size_t i = 0; i < round.size(); ++i) {
        if (left() == 0) {
          initialized = false;
          break;
        }
        const std::uint64_t n = std::min(cfg.init_samples, oracle.remaining());
        for (std::uint64_t j = 0; j < n; ++j) round[i].arm.record(samplers[i].pull());
        round[i].arm.refresh(beta1);
        any_pulled = true;
      }

      if (!initialized) {
        // Quota ran out mid-initialization: keep whichever of the parent set
        // and the pulled candidates has the highest estimate.
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < round.size(); ++i) {
          if (round[i].arm.pulls == 0) continue;
          if (!best || better(round[i], round[*best])) best = i;
        }
        if (best && (!have_current || round[*best].arm.estimate > current.arm.estimate)) {
          adopt(round, *best);
        } else if (any_pulled) {
          ranked_round = round;
          ranked_winner = kNoWinner;
        }
        break;
      }

      std::vector<BernoulliSampler*> arms;
      std::vector<ArmState> states;
      for (std::size_t i = 0; i < round.size(); ++i) {
        arms.push_back(&samplers[i]);
        states.push_back(round[i].arm);
      }
      BestCandidateResult bc = best_candidate(arms, std::move(states), cfg.threshold, params, left());
      for (std::size_t i = 0; i < round.size(); ++i) round[i].arm = bc.arms[i];
      const std::size_t w = bc.index;

      if (round[w].arm.estimate >= cfg.threshold) {
        VerifyResult vr = verify_threshold(samplers[w], round[w].arm, cfg.threshold, params,
                                           left(), k, bc.rounds + 1);
        round[w].arm = vr.state;
        adopt(round, w);
        result.verdict = vr.verdict;
        if (vr.verdict != Verdict::invalid) break;
      } else {
        adopt(round, w);
        result.verdict = Verdict::inconclusive;
      }
      if (left() == 0) break;
    }
  } catch (const BudgetExhausted&) {
    // Only reachable when someone else drains the shared meter; keep what we have.
    log::warn("oracle exhausted during pivot search");
  }

  if (have_current) {
    result.pivot = current.indices;
    result.estimate = current.arm.estimate;
  }
  result.ranked_non_pivot = rank_losers(ranked_round, ranked_winner);
  result.queries_used = spent();
  return result;
}

}  // namespace pivot
