#include "pivot/victim.hpp"

#include <algorithm>
#include <cctype>
#include <utility>

namespace pivot {

const char* to_string(QueryPhase phase) {
  switch (phase) {
    case QueryPhase::clean:
      return "clean";
    case QueryPhase::pivot:
      return "pivot";
    case QueryPhase::perturbation:
      return "perturbation";
  }
  return "unknown";
}

VictimOracle::VictimOracle(std::shared_ptr<Victim> victim, std::uint64_t budget)
    : victim_(std::move(victim)), budget_(budget) {
  if (!victim_) throw std::invalid_argument("VictimOracle needs a victim");
}

Response VictimOracle::query(std::span<const std::string> tokens) {
  std::size_t slot;
  {
    std::lock_guard lock(mutex_);
    if (used_ >= budget_) throw BudgetExhausted();
    ++used_;
    slot = log_.size();
    log_.push_back({Tokens(tokens.begin(), tokens.end()), std::nullopt, phase_, false});
  }
  try {
    Response r = victim_->classify(tokens);
    std::lock_guard lock(mutex_);
    log_[slot].label = r;
    return r;
  } catch (...) {
    std::lock_guard lock(mutex_);
    log_[slot].failed = true;
    throw;
  }
}

std::uint64_t VictimOracle::used() const {
  std::lock_guard lock(mutex_);
  return used_;
}

std::uint64_t VictimOracle::remaining() const {
  std::lock_guard lock(mutex_);
  return budget_ - used_;
}

void VictimOracle::set_phase(QueryPhase phase) {
  std::lock_guard lock(mutex_);
  phase_ = phase;
}

QueryPhase VictimOracle::phase() const {
  std::lock_guard lock(mutex_);
  return phase_;
}

std::vector<AuditEntry> VictimOracle::audit_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

RuleVictim::RuleVictim(KeywordRule rule) : rule_(std::move(rule)) {
  if (std::get<KeywordRule>(rule_).decisive.empty()) {
    throw std::invalid_argument("keyword victim needs at least one decisive token");
  }
}

RuleVictim::RuleVictim(WeightedBagRule rule) : rule_(std::move(rule)) {}

Response RuleVictim::classify(std::span<const std::string> tokens) { return label(tokens); }

Label RuleVictim::label(std::span<const std::string> tokens) const {
  if (const auto* kw = std::get_if<KeywordRule>(&rule_)) {
    const bool all = std::all_of(kw->decisive.begin(), kw->decisive.end(), [&](const auto& d) {
      return d != kMaskToken && std::find(tokens.begin(), tokens.end(), d) != tokens.end();
    });
    return all ? kw->label_if_present : kw->label_otherwise;
  }
  const auto& bag = std::get<WeightedBagRule>(rule_);
  std::int64_t score = bag.bias;
  for (const auto& t : tokens) {
    if (t == kMaskToken) continue;
    if (auto it = bag.weights.find(t); it != bag.weights.end()) score += it->second;
  }
  return score > 0 ? bag.positive : bag.negative;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

}  // namespace pivot
