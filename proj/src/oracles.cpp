#include "pivot/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pivot/bandit.hpp"
#include "pivot/random.hpp"

namespace pivot::oracles {
namespace {

constexpr long double kBigKl = 1e300L;

// Linear scan over q = origin + dir * k * step for k in [0, k_max], returning
// the largest k whose point satisfies ok(), assuming ok holds at k = 0.
template <class Ok>
std::uint64_t scan(std::uint64_t k_from, std::uint64_t k_to, std::uint64_t stride, Ok ok) {
  std::uint64_t best = k_from;
  for (std::uint64_t k = k_from; k <= k_to; k += stride) {
    if (!ok(k)) break;
    best = k;
  }
  return best;
}

template <class Ok>
std::uint64_t two_level_scan(std::uint64_t k_max, Ok ok) {
  constexpr std::uint64_t kCoarse = 1000;
  const std::uint64_t coarse = scan(0, k_max, kCoarse, ok);
  return scan(coarse, std::min(k_max, coarse + kCoarse), 1, ok);
}

}  // namespace

long double kl_reference(long double p, long double q) {
  if (p == q) return 0.0L;
  long double d = 0.0L;
  if (p > 0.0L) {
    if (q == 0.0L) return kBigKl;
    d += p * std::log(p / q);
  }
  if (p < 1.0L) {
    if (q == 1.0L) return kBigKl;
    d += (1.0L - p) * std::log((1.0L - p) / (1.0L - q));
  }
  return d;
}

double grid_upper_bound(double estimate, std::uint64_t pulls, double beta, double step) {
  const long double r = static_cast<long double>(beta) / static_cast<long double>(pulls);
  if (r == 0.0L) return estimate;
  if (kl_reference(estimate, 1.0L) <= r) return 1.0;
  const auto k_max = static_cast<std::uint64_t>(std::floor((1.0 - estimate) / step));
  auto point = [&](std::uint64_t k) { return std::min(1.0, estimate + static_cast<double>(k) * step); };
  const std::uint64_t k =
      two_level_scan(k_max, [&](std::uint64_t k) { return kl_reference(estimate, point(k)) <= r; });
  return point(k);
}

double grid_lower_bound(double estimate, std::uint64_t pulls, double beta, double step) {
  const long double r = static_cast<long double>(beta) / static_cast<long double>(pulls);
  if (r == 0.0L) return estimate;
  if (kl_reference(estimate, 0.0L) <= r) return 0.0;
  const auto k_max = static_cast<std::uint64_t>(std::floor(estimate / step));
  auto point = [&](std::uint64_t k) { return std::max(0.0, estimate - static_cast<double>(k) * step); };
  const std::uint64_t k =
      two_level_scan(k_max, [&](std::uint64_t k) { return kl_reference(estimate, point(k)) <= r; });
  return point(k);
}

double true_retention_precision(const TokenSequence& x, const IndexSet& preserved, Victim& victim,
                                double mask_probability) {
  std::vector<char> keep(x.length(), 0);
  for (std::size_t i : preserved) {
    if (i >= x.length()) throw std::out_of_range("preserved index outside the sequence");
    keep[i] = 1;
  }
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < x.length(); ++i) {
    if (!keep[i]) free.push_back(i);
  }
  if (free.size() > 20) {
    throw std::invalid_argument("true_retention_precision: more than 20 free positions");
  }
  double total = 0.0;
  Tokens z;
  for (std::uint64_t pattern = 0; pattern < (std::uint64_t{1} << free.size()); ++pattern) {
    z = x.tokens();
    double prob = 1.0;
    for (std::size_t b = 0; b < free.size(); ++b) {
      if (pattern >> b & 1) {
        z[free[b]] = std::string(kMaskToken);
        prob *= mask_probability;
      } else {
        prob *= 1.0 - mask_probability;
      }
    }
    if (prob == 0.0) continue;
    const Response r = victim.classify(z);
    if (r && *r == x.original_label()) total += prob;
  }
  return total;
}

std::vector<std::string> brute_force_nearest(const EmbeddingStore& store, const std::string& word,
                                             std::size_t m) {
  const auto q = store.vector(word);
  if (q.empty()) return {};
  std::vector<std::pair<double, std::string>> all;
  for (const auto& w : store.words()) {
    if (w == word) continue;
    all.emplace_back(cosine(q, store.vector(w)), w);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < all.size() && i < m; ++i) out.push_back(all[i].second);
  return out;
}

std::vector<Check> run_bound_checks(std::uint64_t seed, std::size_t triples) {
  std::vector<Check> checks;
  Rng rng(seed);
  auto record = [&](std::string name, bool ok, std::string detail) {
    checks.push_back({std::move(name), ok, std::move(detail)});
  };

  struct Triple {
    double estimate;
    std::uint64_t pulls;
    double beta;
  };
  std::vector<Triple> cases;
  for (std::size_t i = 0; i < triples; ++i) {
    Triple t;
    t.pulls = 1 + uniform_index(rng, 200);
    // Half the estimates are lattice points successes/pulls, as in the
    // bandit loops; the rest are arbitrary reals, with the endpoints included.
    if (i % 2 == 0) {
      t.estimate = static_cast<double>(uniform_index(rng, t.pulls + 1)) / static_cast<double>(t.pulls);
    } else {
      t.estimate = uniform01(rng);
    }
    if (i % 97 == 0) t.estimate = 0.0;
    if (i % 89 == 0) t.estimate = 1.0;
    t.beta = 12.0 * uniform01(rng);
    cases.push_back(t);
  }

  {
    double worst = 0.0;
    for (const auto& t : cases) {
      worst = std::max(worst, std::abs(kl_upper_bound(t.estimate, t.pulls, t.beta) -
                                       grid_upper_bound(t.estimate, t.pulls, t.beta)));
      worst = std::max(worst, std::abs(kl_lower_bound(t.estimate, t.pulls, t.beta) -
                                       grid_lower_bound(t.estimate, t.pulls, t.beta)));
    }
    std::ostringstream os;
    os << cases.size() << " triples, max |bisection - grid| = " << worst << " (tol 1e-5)";
    record("kl bounds match 1e-6 grid scan", worst <= 1e-5, os.str());
  }

  {
    double worst_one = 0.0, worst_zero = 0.0;
    for (const auto& t : cases) {
      worst_one = std::max(worst_one, std::abs(kl_lower_bound(1.0, t.pulls, t.beta) -
                                               std::exp(-t.beta / static_cast<double>(t.pulls))));
      worst_zero = std::max(worst_zero, std::abs(kl_upper_bound(0.0, t.pulls, t.beta) +
                                                 std::expm1(-t.beta / static_cast<double>(t.pulls))));
    }
    std::ostringstream a, b;
    a << "max error " << worst_one << " (tol 1e-9)";
    b << "max error " << worst_zero << " (tol 1e-9)";
    record("lower bound at p=1 equals exp(-beta/n)", worst_one <= 1e-9, a.str());
    record("upper bound at p=0 equals 1-exp(-beta/n)", worst_zero <= 1e-9, b.str());
  }

  {
    std::size_t bad_order = 0, bad_root = 0;
    for (const auto& t : cases) {
      const double lo = kl_lower_bound(t.estimate, t.pulls, t.beta);
      const double hi = kl_upper_bound(t.estimate, t.pulls, t.beta);
      if (!(0.0 <= lo && lo <= t.estimate && t.estimate <= hi && hi <= 1.0)) ++bad_order;
      const long double r = static_cast<long double>(t.beta) / static_cast<long double>(t.pulls);
      // The bound is feasible and the root lies less than 1e-12 beyond it.
      for (const auto& [b, outward] : {std::pair{lo, -1e-12}, std::pair{hi, 1e-12}}) {
        if (b == t.estimate && r == 0.0L) continue;
        if (kl_reference(t.estimate, b) > r * (1.0L + 1e-12L) + 1e-15L) ++bad_root;
        const double beyond = b + outward;
        if (beyond <= 0.0 || beyond >= 1.0) continue;
        if (kl_reference(t.estimate, beyond) <= r) ++bad_root;
      }
    }
    record("0 <= lower <= estimate <= upper <= 1", bad_order == 0,
           std::to_string(bad_order) + " violations");
    record("bounds lie within 1e-12 inside the KL root", bad_root == 0,
           std::to_string(bad_root) + " violations");
  }

  {
    const double v = bernoulli_kl(0.5, 0.25);
    const double ref = static_cast<double>(kl_reference(0.5L, 0.25L));
    record("d(0.5, 0.25) ~ 0.143841", std::abs(v - 0.143841) < 1e-6 && std::abs(v - ref) < 1e-12,
           "got " + std::to_string(v));
    const double l2 = bernoulli_kl(1.0, 0.5);
    record("d(1, 0.5) = log 2", std::abs(l2 - std::log(2.0)) < 1e-15, "got " + std::to_string(l2));
  }

  {
    const ExplorationParams p{1.0, 1.1, 0.85, 0.9};
    const double b = exploration_rate(5, 1, p);
    const double inner = 5.0 / 0.85;
    record("beta(5, 1) = log(5/0.85) + log log(5/0.85)",
           std::abs(b - (std::log(inner) + std::log(std::log(inner)))) < 1e-12 &&
               std::abs(b - 2.344041338) < 1e-9,
           "got " + std::to_string(b));
    const double e2 = exploration_rate(1, 1, {std::exp(2.0) * 0.85, 1.1, 0.85, 0.9});
    record("beta with inner e^2 equals 2 + log 2", std::abs(e2 - (2.0 + std::log(2.0))) < 1e-12,
           "got " + std::to_string(e2));
    record("beta grows with t", exploration_rate(5, 100, p) > exploration_rate(5, 10, p), "");
  }
  return checks;
}

}  // namespace pivot::oracles
