#pragma once

#include <cstdint>

#include "pivot/bandit.hpp"

namespace pivot {

// Every attack hyperparameter in one record.
struct AttackConfig {
  std::uint64_t budget = 100;       // B, total victim queries per input
  double quota_fraction = 0.8;      // gamma, share of B for the pivot search
  double threshold = 0.85;          // tau, retention precision target
  double epsilon = 0.9;             // KL-LUCB stopping tolerance
  double delta = 0.85;              // confidence parameter
  double lambda = 1.0;              // scale inside the exploration rate
  double alpha = 1.1;               // growth exponent of the exploration rate
  std::uint64_t init_samples = 5;   // N, samples per new arm and for culling
  std::uint64_t candidate_size = 50;  // M, substitutes per token
  double mask_probability = 0.5;
  double cull_threshold = 0.95;
  double h_base = 0.1;
  double h_max = 0.25;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument naming the first violated constraint.
  void validate() const;

  ExplorationParams exploration() const { return {lambda, alpha, delta, epsilon}; }

  // ceil(gamma * B), computed without floating-point spill-over.
  std::uint64_t pivot_quota() const;
};

}  // namespace pivot
