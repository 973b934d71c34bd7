// pivotattack: attack a dataset, summarize a results file, or run the
// confidence-bound self checks.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "pivot/harness.hpp"
#include "pivot/oracles.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Flat "key = value" file whose keys are the long flag names. The pairs are
// turned into arguments placed before the real ones, so flags win.
std::vector<std::string> config_file_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path);
  std::vector<std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CLI::ParseError("config " + path + ":" + std::to_string(lineno) + ": expected key = value",
                            CLI::ExitCodes::ConfigError);
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    for (auto& c : key) {
      if (c == '_') c = '-';
    }
    if (key == "config") continue;
    out.push_back("--" + key);
    out.push_back(value);
  }
  return out;
}

struct AttackArgs {
  std::string dataset;
  std::string format;
  std::string embeddings;
  std::string victim;
  std::string victim_config;
  std::string endpoint;
  std::string out = "-";
  std::string config;
  std::string order = "pivot";
  unsigned parallelism = 1;
  std::size_t min_tokens = 0;
  pivot::AttackConfig cfg;
};

void add_attack_options(CLI::App& sub, AttackArgs& a) {
  sub.add_option("--config", a.config, "flat key = value file mirroring these flags");
  sub.add_option("--dataset", a.dataset, "dataset path")->required();
  sub.add_option("--format", a.format, "jsonl or csv (default: from the file extension)")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  sub.add_option("--embeddings", a.embeddings, "word vectors in text format")->required();
  sub.add_option("--victim", a.victim, "victim kind")
      ->required()
      ->check(CLI::IsMember({"keyword", "bow", "remote"}));
  sub.add_option("--victim-config", a.victim_config, "JSON victim description");
  sub.add_option("--endpoint", a.endpoint, "URL of a remote victim");
  sub.add_option("--budget", a.cfg.budget, "query budget B per input");
  sub.add_option("--gamma", a.cfg.quota_fraction, "share of B for the pivot search");
  sub.add_option("--tau", a.cfg.threshold, "retention precision threshold");
  sub.add_option("--epsilon", a.cfg.epsilon, "KL-LUCB stopping tolerance");
  sub.add_option("--delta", a.cfg.delta, "confidence parameter");
  sub.add_option("--lambda", a.cfg.lambda, "exploration rate scale");
  sub.add_option("--alpha", a.cfg.alpha, "exploration rate exponent");
  sub.add_option("--init-samples", a.cfg.init_samples, "samples per new arm (N)");
  sub.add_option("--candidates", a.cfg.candidate_size, "substitutes per token (M)");
  sub.add_option("--mask-prob", a.cfg.mask_probability, "masking probability");
  sub.add_option("--cull-threshold", a.cfg.cull_threshold, "culling threshold on p0_lb");
  sub.add_option("--h-base", a.cfg.h_base, "base perturbation rate");
  sub.add_option("--h-max", a.cfg.h_max, "maximum perturbation rate");
  sub.add_option("--seed", a.cfg.seed, "run seed (PIVOT_SEED overrides)");
  sub.add_option("--parallelism", a.parallelism, "worker threads")->check(CLI::PositiveNumber);
  sub.add_option("--min-tokens", a.min_tokens, "drop entries with fewer tokens");
  sub.add_option("--position-order", a.order, "pivot, or random for the ablation baseline")
      ->check(CLI::IsMember({"pivot", "random"}));
  sub.add_option("--out", a.out, "results file, - for stdout");
}

pivot::DatasetFormat infer_format(const AttackArgs& a) {
  if (!a.format.empty()) return pivot::parse_dataset_format(a.format);
  const auto ext = std::filesystem::path(a.dataset).extension().string();
  return ext == ".csv" ? pivot::DatasetFormat::csv : pivot::DatasetFormat::jsonl;
}

int run_attack_command(AttackArgs& a) {
  if (const char* env = std::getenv("PIVOT_SEED"); env && *env) {
    try {
      a.cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "error: PIVOT_SEED is not an unsigned integer: " << env << '\n';
      return kExitUsage;
    }
  }
  try {
    a.cfg.validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  nlohmann::json victim_json = nlohmann::json::object();
  if (!a.victim_config.empty()) {
    std::ifstream in(a.victim_config);
    if (!in) {
      std::cerr << "error: cannot open victim config " << a.victim_config << '\n';
      return kExitUsage;
    }
    victim_json = nlohmann::json::parse(in);
  } else if (a.victim != "remote") {
    std::cerr << "error: --victim " << a.victim << " needs --victim-config\n";
    return kExitUsage;
  }
  const auto factory = pivot::make_victim_factory(a.victim, victim_json, a.endpoint);

  const auto entries = pivot::load_dataset_file(a.dataset, infer_format(a));
  const auto store = pivot::load_vectors_file(a.embeddings);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (a.out != "-") {
    file.open(a.out, std::ios::binary | std::ios::trunc);
    if (!file) {
      std::cerr << "error: cannot write " << a.out << '\n';
      return kExitError;
    }
    out = &file;
  }

  pivot::RunOptions options;
  options.parallelism = a.parallelism;
  options.min_tokens = a.min_tokens;
  options.order = a.order == "random" ? pivot::PositionOrder::random : pivot::PositionOrder::pivot;
  const auto records = pivot::run_dataset(entries, factory, store, a.cfg, options,
                                          [&](const pivot::AttackRecord& r) {
                                            pivot::write_record(*out, r);
                                            out->flush();
                                          });
  const auto summary = pivot::summarize(records);
  pivot::write_summary(*out, summary);
  if (out != &std::cout) {
    std::cerr << pivot::to_json(summary).dump() << '\n';
  }
  return summary.errors > 0 ? kExitError : kExitOk;
}

int run_summarize_command(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open " << path << '\n';
    return kExitError;
  }
  const auto records = pivot::read_records(in);
  std::cout << pivot::to_json(pivot::summarize(records)).dump(2) << '\n';
  return kExitOk;
}

int run_verify_command(std::uint64_t seed, std::size_t triples) {
  bool all = true;
  for (const auto& c : pivot::oracles::run_bound_checks(seed, triples)) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) std::cout << ": " << c.detail;
    std::cout << '\n';
    all = all && c.passed;
  }
  return all ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hard-label text attack guided by KL-LUCB pivot search"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  AttackArgs attack;
  auto* attack_cmd = app.add_subcommand("attack", "attack every entry of a dataset");
  add_attack_options(*attack_cmd, attack);

  std::string in_path;
  auto* summarize_cmd = app.add_subcommand("summarize", "recompute the summary of a results file");
  summarize_cmd->add_option("--in", in_path, "results file")->required();

  std::uint64_t verify_seed = 7;
  std::size_t verify_triples = 1000;
  auto* verify_cmd = app.add_subcommand("verify-bounds", "check the KL confidence bounds against grid-scan oracles");
  verify_cmd->add_option("--seed", verify_seed, "seed for the random cases");
  verify_cmd->add_option("--triples", verify_triples, "random (estimate, pulls, beta) cases");

  std::vector<std::string> forward(argv + 1, argv + argc);
  try {
    // Config-file pairs go right after the subcommand name so that explicit
    // flags, parsed later, take precedence.
    for (std::size_t i = 0; i < forward.size(); ++i) {
      std::string path;
      if (forward[i] == "--config" && i + 1 < forward.size()) {
        path = forward[i + 1];
      } else if (forward[i].rfind("--config=", 0) == 0) {
        path = forward[i].substr(9);
      } else {
        continue;
      }
      const auto extra = config_file_args(path);
      const auto sub = std::find(forward.begin(), forward.end(), "attack");
      if (sub != forward.end()) forward.insert(sub + 1, extra.begin(), extra.end());
      break;
    }
    // CLI11 consumes a reversed argument vector.
    std::vector<std::string> reversed(forward.rbegin(), forward.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*attack_cmd) return run_attack_command(attack);
    if (*summarize_cmd) return run_summarize_command(in_path);
    if (*verify_cmd) return run_verify_command(verify_seed, verify_triples);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}
