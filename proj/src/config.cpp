#include "pivot/config.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pivot {
namespace {

bool unit(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

void AttackConfig::validate() const {
  if (!unit(quota_fraction)) throw std::invalid_argument("quota_fraction (gamma) must lie in [0, 1]");
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold (tau) must lie in (0, 1)");
  if (!unit(mask_probability)) throw std::invalid_argument("mask_probability must lie in [0, 1]");
  if (!unit(cull_threshold)) throw std::invalid_argument("cull_threshold must lie in [0, 1]");
  if (!unit(h_base)) throw std::invalid_argument("h_base must lie in [0, 1]");
  if (!unit(h_max)) throw std::invalid_argument("h_max must lie in [0, 1]");
  if (h_base > h_max) throw std::invalid_argument("h_base must not exceed h_max");
  if (init_samples == 0) throw std::invalid_argument("init_samples (N) must be >= 1");
  if (candidate_size == 0) throw std::invalid_argument("candidate_size (M) must be >= 1");
  exploration().validate();
}

std::uint64_t AttackConfig::pivot_quota() const {
  const double exact = quota_fraction * static_cast<double>(budget);
  // 0.8 * 100 evaluates to 80.00000000000001 in some orderings; absorb that.
  const double q = std::ceil(exact - 1e-9 * std::max(1.0, exact));
  return q <= 0.0 ? 0 : static_cast<std::uint64_t>(q);
}

}  // namespace pivot
