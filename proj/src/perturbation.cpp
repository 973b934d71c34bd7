#include "pivot/perturbation.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace pivot {

double perturbation_rate(std::span<const std::string> original, std::span<const std::string> adv) {
  if (original.size() != adv.size()) {
    throw std::invalid_argument("perturbation_rate: length mismatch");
  }
  if (original.empty()) return 0.0;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    if (original[i] != adv[i]) ++changed;
  }
  return static_cast<double>(changed) / static_cast<double>(original.size());
}

double dynamic_threshold(const AttackConfig& cfg, std::uint64_t remaining_budget,
                         std::size_t length) {
  if (length == 0) throw std::invalid_argument("dynamic_threshold: length must be >= 1");
  return std::min(cfg.h_max, cfg.h_base + static_cast<double>(remaining_budget) /
                                              static_cast<double>(length));
}

SubstitutionSet build_substitution_set(const std::string& token, std::size_t index,
                                       const EmbeddingStore& store, std::size_t m) {
  if (m == 0) throw std::invalid_argument("substitution set size must be >= 1");
  return {index, store.nearest(token, m)};
}

std::vector<AdversarialCandidate> select_adversarial(const TokenSequence& x,
                                                     std::span<const std::string> working,
                                                     std::size_t index,
                                                     const SubstitutionSet& subs,
                                                     const EmbeddingStore& store) {
  if (working.size() != x.length()) throw std::invalid_argument("working sequence length mismatch");
  if (index >= x.length()) throw std::out_of_range("substitution index outside the sequence");
  std::vector<AdversarialCandidate> out;
  out.reserve(subs.candidates.size());
  for (const auto& sub : subs.candidates) {
    AdversarialCandidate c;
    c.tokens.assign(working.begin(), working.end());
    c.tokens[index] = sub;
    for (std::size_t i = 0; i < c.tokens.size(); ++i) {
      if (c.tokens[i] != x[i]) c.changed_indices.push_back(i);
    }
    c.pert = perturbation_rate(x.tokens(), c.tokens);
    c.similarity = store.sentence_similarity(x.tokens(), c.tokens);
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.similarity > b.similarity;
  });
  return out;
}

std::vector<AdversarialCandidate> select_adversarial(const TokenSequence& x, std::size_t index,
                                                     const SubstitutionSet& subs,
                                                     const EmbeddingStore& store) {
  return select_adversarial(x, x.tokens(), index, subs, store);
}

std::vector<const AdversarialCandidate*> eligible_candidates(
    std::span<const AdversarialCandidate> candidates, const AttackConfig& cfg,
    std::uint64_t remaining_budget, std::size_t length) {
  const double h = dynamic_threshold(cfg, remaining_budget, length);
  std::vector<const AdversarialCandidate*> out;
  for (const auto& c : candidates) {
    if (c.pert <= h) out.push_back(&c);
  }
  return out;
}

PerturbationOutcome execute_attack(const TokenSequence& x, const PivotResult& pivot,
                                   VictimOracle& oracle, const EmbeddingStore& store,
                                   const AttackConfig& cfg) {
  oracle.set_phase(QueryPhase::perturbation);
  PerturbationOutcome out;
  out.tokens = x.tokens();
  const std::uint64_t start = oracle.used();

  std::vector<std::size_t> positions;
  std::vector<char> listed(x.length(), 0);
  auto push = [&](std::size_t p) {
    if (p < x.length() && !listed[p]) {
      listed[p] = 1;
      positions.push_back(p);
    }
  };
  for (std::size_t p : pivot.pivot_order) push(p);
  for (std::size_t p : pivot.ranked_non_pivot) push(p);

  std::set<Tokens> seen{x.tokens()};
  Tokens working = x.tokens();

  try {
    for (std::size_t pos : positions) {
      if (oracle.remaining() == 0) break;
      const SubstitutionSet subs = build_substitution_set(x[pos], pos, store, cfg.candidate_size);
      if (subs.candidates.empty()) continue;
      ++out.positions_tried;
      const auto candidates = select_adversarial(x, working, pos, subs, store);

      const AdversarialCandidate* retained = nullptr;
      for (const auto& c : candidates) {
        if (oracle.remaining() == 0) break;
        if (c.pert > dynamic_threshold(cfg, oracle.remaining(), x.length())) {
          ++out.skipped_over_threshold;
          continue;
        }
        if (!seen.insert(c.tokens).second) {
          ++out.skipped_duplicate;
          continue;
        }
        const Response r = oracle.query(c.tokens);
        if (r.has_value() && *r != x.original_label()) {
          out.success = true;
          out.tokens = c.tokens;
          out.queries_used = oracle.used() - start;
          return out;
        }
        if (!retained) retained = &c;
      }
      if (retained) working = retained->tokens;
    }
  } catch (const BudgetExhausted&) {
    // Shared meter drained elsewhere; fall through with what was tried.
  }
  out.tokens = working;
  out.queries_used = oracle.used() - start;
  return out;
}

}  // namespace pivot
