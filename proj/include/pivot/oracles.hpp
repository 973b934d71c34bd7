#pragma once

// Reference computations used to check the library, kept apart from the code
// paths they check: linear grid scans instead of bisection, exhaustive
// enumeration instead of sampling, full scans instead of partial sorts.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pivot/embeddings.hpp"
#include "pivot/pivot_search.hpp"
#include "pivot/victim.hpp"

namespace pivot::oracles {

// Bernoulli KL evaluated in long double straight from its definition.
long double kl_reference(long double p, long double q);

// Largest q on the grid {estimate + k*step} (and 1.0) with
// kl_reference(estimate, q) <= beta/pulls. Scans a coarse grid first, then
// the fine grid inside the crossing cell; both scans are linear.
double grid_upper_bound(double estimate, std::uint64_t pulls, double beta, double step = 1e-6);
double grid_lower_bound(double estimate, std::uint64_t pulls, double beta, double step = 1e-6);

// Exact retention precision of `preserved` under independent masking, by
// enumerating all 2^(L - |preserved|) mask patterns. Throws
// std::invalid_argument when more than 20 positions are free.
double true_retention_precision(const TokenSequence& x, const IndexSet& preserved, Victim& victim,
                                double mask_probability);

// Full scan with std::sort over every other vocabulary word.
std::vector<std::string> brute_force_nearest(const EmbeddingStore& store, const std::string& word,
                                             std::size_t m);

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

// The bandit-core oracle suite: bisection bounds against grid scans on
// `triples` random cases, closed forms at the endpoints, bound invariants and
// exploration-rate examples.
std::vector<Check> run_bound_checks(std::uint64_t seed, std::size_t triples = 1000);

}  // namespace pivot::oracles
