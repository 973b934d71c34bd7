#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pivot/config.hpp"
#include "pivot/embeddings.hpp"
#include "pivot/victim.hpp"

namespace pivot {

struct DatasetEntry {
  std::string id;
  std::string text;
  Label label = 0;
};

enum class DatasetFormat { jsonl, csv };

// "jsonl" or "csv"; throws std::invalid_argument otherwise.
DatasetFormat parse_dataset_format(const std::string& name);

class DatasetError : public std::runtime_error {
 public:
  DatasetError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// jsonl: one object per line with "text" (string), "label" (integer >= 0)
// and optional "id"; a missing id becomes the zero-based line index.
// csv: header naming text,label[,id] in any order, RFC 4180 quoting; a
// missing id becomes the zero-based data row index.
std::vector<DatasetEntry> load_dataset(std::istream& in, DatasetFormat format);
std::vector<DatasetEntry> load_dataset_file(const std::string& path, DatasetFormat format);

struct AttackRecord {
  std::string id;
  bool success = false;
  bool skipped = false;
  // "misclassified" or "culled" when skipped.
  std::string skip_reason;
  std::optional<std::string> error;
  Label label = 0;
  Tokens original_tokens;
  std::optional<Tokens> adversarial_tokens;
  std::uint64_t queries_used = 0;
  std::uint64_t pivot_queries = 0;
  double pert = 0.0;
  double sim = 0.0;
  std::vector<std::size_t> pivot_indices;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const AttackRecord& r);
AttackRecord record_from_json(const nlohmann::json& j);

struct RunSummary {
  // Percentages.
  double asr = 0.0;
  double mean_pert = 0.0;
  double mean_sim = 0.0;
  std::uint64_t total_queries = 0;
  std::size_t attempted = 0;
  std::size_t skipped = 0;
  std::size_t successes = 0;
  std::size_t errors = 0;
  // Set when nothing was attempted, so asr = 0 carries no information.
  bool no_attempts = false;
};

nlohmann::json to_json(const RunSummary& s);

RunSummary summarize(std::span<const AttackRecord> records);

// Yields a fresh victim per entry; each gets its own meter.
using VictimFactory = std::function<std::shared_ptr<Victim>()>;

// `pivot` is the full attack. `random` is the ablation baseline: no pivot
// search, positions attacked in a seeded random order with the full budget.
enum class PositionOrder { pivot, random };

// Per-entry seed derived from the run seed and the entry id.
std::uint64_t entry_seed(std::uint64_t run_seed, const std::string& id);

AttackRecord run_attack(const DatasetEntry& entry, const VictimFactory& make_victim,
                        const EmbeddingStore& store, const AttackConfig& cfg,
                        PositionOrder order = PositionOrder::pivot);

// Variant exposing the oracle used, so tests can inspect its audit log.
AttackRecord run_attack(const DatasetEntry& entry, VictimOracle& oracle,
                        const EmbeddingStore& store, const AttackConfig& cfg,
                        PositionOrder order = PositionOrder::pivot);

struct RunOptions {
  unsigned parallelism = 1;
  std::size_t min_tokens = 0;
  PositionOrder order = PositionOrder::pivot;
};

// Attacks every entry (entries shorter than min_tokens are dropped before
// attack). `sink` sees records in dataset order whatever the parallelism.
std::vector<AttackRecord> run_dataset(const std::vector<DatasetEntry>& entries,
                                      const VictimFactory& make_victim,
                                      const EmbeddingStore& store, const AttackConfig& cfg,
                                      const RunOptions& options,
                                      const std::function<void(const AttackRecord&)>& sink = {});

// One JSON object per line, then {"summary": {...}}.
void write_record(std::ostream& out, const AttackRecord& r);
void write_summary(std::ostream& out, const RunSummary& s);

// Reads a results file and returns its records, ignoring summary lines.
std::vector<AttackRecord> read_records(std::istream& in);

// Victim construction from a JSON description (see README for the schemas).
// kind is "keyword", "bow" or "remote"; a non-empty endpoint overrides the
// config's.
VictimFactory make_victim_factory(const std::string& kind, const nlohmann::json& config,
                                  const std::string& endpoint = {});

}  // namespace pivot
