#include "pivot/harness.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <mutex>
#include <numeric>
#include <thread>

#include "pivot/perturbation.hpp"
#include "pivot/pivot_search.hpp"
#include "pivot/random.hpp"

namespace pivot {

using nlohmann::json;

std::uint64_t entry_seed(std::uint64_t run_seed, const std::string& id) {
  return derive_seed(run_seed, id);
}

AttackRecord run_attack(const DatasetEntry& entry, VictimOracle& oracle,
                        const EmbeddingStore& store, const AttackConfig& cfg,
                        PositionOrder order) {
  cfg.validate();
  AttackRecord rec;
  rec.id = entry.id;
  rec.label = entry.label;
  rec.seed = entry_seed(cfg.seed, entry.id);
  rec.original_tokens = tokenize(entry.text);
  Rng rng(rec.seed);

  auto finish = [&] {
    rec.queries_used = oracle.used();
    return rec;
  };

  std::optional<TokenSequence> x;
  try {
    x.emplace(rec.original_tokens, entry.label);
  } catch (const std::invalid_argument& e) {
    rec.error = e.what();
    return finish();
  }

  try {
    oracle.set_phase(QueryPhase::clean);
    Response clean;
    try {
      clean = oracle.query(x->tokens());
    } catch (const BudgetExhausted&) {
      return finish();
    }
    if (!clean) {
      rec.skipped = true;
      rec.skip_reason = "refused";
      return finish();
    }
    if (*clean != entry.label) {
      rec.skipped = true;
      rec.skip_reason = "misclassified";
      return finish();
    }

    PivotResult plan;
    if (order == PositionOrder::pivot) {
      const std::uint64_t before = oracle.used();
      plan = find_pivot(*x, oracle, cfg, rng);
      rec.pivot_queries = oracle.used() - before;
      rec.pivot_indices = plan.pivot;
      if (plan.culled) {
        rec.skipped = true;
        rec.skip_reason = "culled";
        return finish();
      }
    } else {
      std::vector<std::size_t> perm(x->length());
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = perm.size(); i > 1; --i) {
        std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
      }
      plan.ranked_non_pivot = std::move(perm);
    }

    const PerturbationOutcome outcome = execute_attack(*x, plan, oracle, store, cfg);
    if (outcome.success) {
      rec.success = true;
      rec.adversarial_tokens = outcome.tokens;
      rec.pert = perturbation_rate(x->tokens(), outcome.tokens);
      rec.sim = store.sentence_similarity(x->tokens(), outcome.tokens);
    }
  } catch (const VictimError& e) {
    rec.error = e.what();
  }
  return finish();
}

AttackRecord run_attack(const DatasetEntry& entry, const VictimFactory& make_victim,
                        const EmbeddingStore& store, const AttackConfig& cfg,
                        PositionOrder order) {
  std::shared_ptr<Victim> victim;
  try {
    victim = make_victim();
  } catch (const std::exception& e) {
    AttackRecord rec;
    rec.id = entry.id;
    rec.label = entry.label;
    rec.seed = entry_seed(cfg.seed, entry.id);
    rec.original_tokens = tokenize(entry.text);
    rec.error = std::string("victim construction failed: ") + e.what();
    return rec;
  }
  VictimOracle oracle(std::move(victim), cfg.budget);
  return run_attack(entry, oracle, store, cfg, order);
}

RunSummary summarize(std::span<const AttackRecord> records) {
  RunSummary s;
  double pert_sum = 0.0, sim_sum = 0.0;
  for (const auto& r : records) {
    s.total_queries += r.queries_used;
    if (r.skipped) {
      ++s.skipped;
      continue;
    }
    ++s.attempted;
    if (r.error) ++s.errors;
    if (r.success) {
      ++s.successes;
      pert_sum += r.pert;
      sim_sum += r.sim;
    }
  }
  s.no_attempts = s.attempted == 0;
  if (s.attempted) s.asr = 100.0 * static_cast<double>(s.successes) / static_cast<double>(s.attempted);
  if (s.successes) {
    s.mean_pert = 100.0 * pert_sum / static_cast<double>(s.successes);
    s.mean_sim = sim_sum / static_cast<double>(s.successes);
  }
  return s;
}

std::vector<AttackRecord> run_dataset(const std::vector<DatasetEntry>& entries,
                                      const VictimFactory& make_victim,
                                      const EmbeddingStore& store, const AttackConfig& cfg,
                                      const RunOptions& options,
                                      const std::function<void(const AttackRecord&)>& sink) {
  cfg.validate();
  std::vector<const DatasetEntry*> work;
  for (const auto& e : entries) {
    if (tokenize(e.text).size() >= options.min_tokens) work.push_back(&e);
  }

  std::vector<std::optional<AttackRecord>> results(work.size());
  std::mutex mutex;
  std::condition_variable ready;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < work.size();) {
      AttackRecord rec;
      try {
        rec = run_attack(*work[i], make_victim, store, cfg, options.order);
      } catch (const std::exception& e) {
        rec.id = work[i]->id;
        rec.label = work[i]->label;
        rec.original_tokens = tokenize(work[i]->text);
        rec.error = e.what();
      }
      std::lock_guard lock(mutex);
      results[i] = std::move(rec);
      ready.notify_all();
    }
  };

  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(options.parallelism, static_cast<unsigned>(work.size())));
  std::vector<std::jthread> pool;
  for (unsigned t = n_threads == 1 ? 1 : 0; t < n_threads; ++t) pool.emplace_back(worker);

  // Emit in dataset order so record files do not depend on scheduling.
  std::size_t emitted = 0;
  auto flush = [&] {
    std::unique_lock lock(mutex);
    while (emitted < results.size() && results[emitted]) {
      const AttackRecord& rec = *results[emitted];
      ++emitted;
      if (sink) {
        lock.unlock();
        sink(rec);
        lock.lock();
      }
    }
  };
  if (n_threads == 1) {
    worker();
  } else {
    std::unique_lock lock(mutex);
    while (emitted < results.size()) {
      ready.wait(lock, [&] { return results[emitted].has_value(); });
      lock.unlock();
      flush();
      lock.lock();
    }
  }
  flush();
  pool.clear();

  std::vector<AttackRecord> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

json to_json(const AttackRecord& r) {
  json j;
  j["id"] = r.id;
  j["success"] = r.success;
  j["skipped"] = r.skipped;
  j["skip_reason"] = r.skip_reason;
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  j["label"] = r.label;
  j["original_tokens"] = r.original_tokens;
  j["adversarial_tokens"] = r.adversarial_tokens ? json(*r.adversarial_tokens) : json(nullptr);
  j["queries_used"] = r.queries_used;
  j["pivot_queries"] = r.pivot_queries;
  j["pert"] = r.pert;
  j["sim"] = r.sim;
  j["pivot_indices"] = r.pivot_indices;
  j["seed"] = r.seed;
  return j;
}

AttackRecord record_from_json(const json& j) {
  AttackRecord r;
  r.id = j.at("id").get<std::string>();
  r.success = j.at("success").get<bool>();
  r.skipped = j.at("skipped").get<bool>();
  r.skip_reason = j.value("skip_reason", std::string{});
  if (j.contains("error") && !j["error"].is_null()) r.error = j["error"].get<std::string>();
  r.label = j.value("label", Label{0});
  r.original_tokens = j.at("original_tokens").get<Tokens>();
  if (j.contains("adversarial_tokens") && !j["adversarial_tokens"].is_null()) {
    r.adversarial_tokens = j["adversarial_tokens"].get<Tokens>();
  }
  r.queries_used = j.at("queries_used").get<std::uint64_t>();
  r.pivot_queries = j.value("pivot_queries", std::uint64_t{0});
  r.pert = j.at("pert").get<double>();
  r.sim = j.at("sim").get<double>();
  r.pivot_indices = j.value("pivot_indices", std::vector<std::size_t>{});
  r.seed = j.value("seed", std::uint64_t{0});
  return r;
}

json to_json(const RunSummary& s) {
  return json{{"asr", s.asr},
              {"mean_pert", s.mean_pert},
              {"mean_sim", s.mean_sim},
              {"total_queries", s.total_queries},
              {"attempted", s.attempted},
              {"skipped", s.skipped},
              {"successes", s.successes},
              {"errors", s.errors},
              {"no_attempts", s.no_attempts}};
}

void write_record(std::ostream& out, const AttackRecord& r) { out << to_json(r).dump() << '\n'; }

void write_summary(std::ostream& out, const RunSummary& s) {
  out << json{{"summary", to_json(s)}}.dump() << '\n';
}

std::vector<AttackRecord> read_records(std::istream& in) {
  std::vector<AttackRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (j.contains("summary")) continue;
      out.push_back(record_from_json(j));
    } catch (const json::exception& e) {
      throw DatasetError(lineno, std::string("bad result record: ") + e.what());
    }
  }
  return out;
}

VictimFactory make_victim_factory(const std::string& kind, const json& config,
                                  const std::string& endpoint) {
  if (kind == "keyword") {
    KeywordRule rule;
    rule.decisive = config.at("tokens").get<std::vector<std::string>>();
    rule.label_if_present = config.value("label_if_present", Label{1});
    rule.label_otherwise = config.value("label_otherwise", Label{0});
    RuleVictim probe(rule);  // validates once up front
    return [rule] { return std::make_shared<RuleVictim>(rule); };
  }
  if (kind == "bow") {
    WeightedBagRule rule;
    for (const auto& [word, w] : config.at("weights").items()) rule.weights[word] = w.get<std::int64_t>();
    rule.bias = config.value("bias", std::int64_t{0});
    rule.positive = config.value("positive", Label{1});
    rule.negative = config.value("negative", Label{0});
    return [rule] { return std::make_shared<RuleVictim>(rule); };
  }
  if (kind == "remote") {
    RemoteVictimConfig rc;
    rc.endpoint = config.value("endpoint", std::string{});
    if (!endpoint.empty()) rc.endpoint = endpoint;
    rc.timeout_ms = config.value("timeout_ms", rc.timeout_ms);
    rc.retries = config.value("retries", rc.retries);
    rc.label_field = config.value("label_field", rc.label_field);
    rc.bearer_token = config.value("bearer_token", rc.bearer_token);
    RemoteVictim probe(rc);
    return [rc] { return std::make_shared<RemoteVictim>(rc); };
  }
  throw std::invalid_argument("unknown victim kind '" + kind + "' (expected keyword, bow or remote)");
}

}  // namespace pivot
