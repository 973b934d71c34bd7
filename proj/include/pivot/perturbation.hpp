#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pivot/config.hpp"
#include "pivot/embeddings.hpp"
#include "pivot/pivot_search.hpp"
#include "pivot/victim.hpp"

namespace pivot {

struct SubstitutionSet {
  std::size_t target_index = 0;
  // Most similar first; never contains the original token.
  std::vector<std::string> candidates;
};

struct AdversarialCandidate {
  Tokens tokens;
  // Positions where tokens differ from the original input, ascending.
  std::vector<std::size_t> changed_indices;
  double similarity = 0.0;
  double pert = 0.0;
};

// Fraction of positions where the two sequences differ. Throws
// std::invalid_argument on a length mismatch.
double perturbation_rate(std::span<const std::string> original, std::span<const std::string> adv);

// h = min(h_max, h_base + remaining / length).
double dynamic_threshold(const AttackConfig& cfg, std::uint64_t remaining_budget,
                         std::size_t length);

SubstitutionSet build_substitution_set(const std::string& token, std::size_t index,
                                       const EmbeddingStore& store, std::size_t m);

// One candidate per substitute, placed at `index` of `working` (which already
// carries earlier substitutions). Pert and similarity are measured against
// the original input. Sorted by descending similarity, ties keep the
// substitution-set order.
std::vector<AdversarialCandidate> select_adversarial(const TokenSequence& x,
                                                     std::span<const std::string> working,
                                                     std::size_t index,
                                                     const SubstitutionSet& subs,
                                                     const EmbeddingStore& store);

// Convenience overload for a single substitution on the clean input.
std::vector<AdversarialCandidate> select_adversarial(const TokenSequence& x, std::size_t index,
                                                     const SubstitutionSet& subs,
                                                     const EmbeddingStore& store);

// Candidates whose Pert does not exceed the threshold at this budget.
std::vector<const AdversarialCandidate*> eligible_candidates(
    std::span<const AdversarialCandidate> candidates, const AttackConfig& cfg,
    std::uint64_t remaining_budget, std::size_t length);

struct PerturbationOutcome {
  bool success = false;
  // The flipping sequence on success, otherwise the last retained sequence.
  Tokens tokens;
  std::uint64_t queries_used = 0;
  std::uint64_t skipped_over_threshold = 0;
  std::uint64_t skipped_duplicate = 0;
  std::size_t positions_tried = 0;
};

// Attacks pivot positions (in insertion order) then the ranked non-pivot
// positions. At each position the similarity-ordered candidates are queried
// until one flips the label; over-threshold and already-seen candidates are
// skipped without a query. Without a flip the most similar queried
// candidate is kept and the next position builds on it. Runs in
// QueryPhase::perturbation.
PerturbationOutcome execute_attack(const TokenSequence& x, const PivotResult& pivot,
                                   VictimOracle& oracle, const EmbeddingStore& store,
                                   const AttackConfig& cfg);

}  // namespace pivot
