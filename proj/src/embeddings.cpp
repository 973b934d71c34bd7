#include "pivot/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pivot/log.hpp"
#include "pivot/victim.hpp"

namespace pivot {
namespace {

double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double norm(std::span<const double> u) { return std::sqrt(dot(u, u)); }

double cosine_with_norms(std::span<const double> u, double nu, std::span<const double> v,
                         double nv) {
  if (nu == 0.0 || nv == 0.0) return 0.0;
  const double c = dot(u, v) / (nu * nv);
  return std::clamp(c, -1.0, 1.0);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool is_integer(std::string_view s) {
  long long v;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

EmbeddingFormatError::EmbeddingFormatError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("cosine: dimension mismatch (" + std::to_string(u.size()) +
                                " vs " + std::to_string(v.size()) + ")");
  }
  return cosine_with_norms(u, norm(u), v, norm(v));
}

EmbeddingStore::EmbeddingStore(std::vector<std::string> words,
                               const std::vector<std::vector<double>>& vectors) {
  if (words.size() != vectors.size()) throw std::invalid_argument("words/vectors size mismatch");
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i == 0) dim_ = vectors[0].size();
    if (vectors[i].size() != dim_ || dim_ == 0) {
      throw EmbeddingFormatError(i + 1, "vector for '" + words[i] + "' has " +
                                            std::to_string(vectors[i].size()) +
                                            " components, expected " + std::to_string(dim_));
    }
    add(std::move(words[i]), vectors[i], i + 1);
  }
}

void EmbeddingStore::add(std::string word, std::span<const double> v, std::size_t line) {
  const double n = norm(v);
  if (n == 0.0) throw EmbeddingFormatError(line, "zero-norm vector for '" + word + "'");
  if (index_.count(word)) {
    log::warn("embeddings line " + std::to_string(line) + ": duplicate word '" + word +
              "' ignored");
    return;
  }
  index_.emplace(word, words_.size());
  words_.push_back(std::move(word));
  data_.insert(data_.end(), v.begin(), v.end());
  norms_.push_back(n);
}

std::optional<std::size_t> EmbeddingStore::index_of(std::string_view word) const {
  if (word == kMaskToken) return std::nullopt;
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool EmbeddingStore::contains(std::string_view word) const { return index_of(word).has_value(); }

std::span<const double> EmbeddingStore::vector(std::string_view word) const {
  auto i = index_of(word);
  if (!i) return {};
  return row(*i);
}

std::vector<Neighbor> EmbeddingStore::nearest_with_scores(std::string_view word,
                                                          std::size_t m) const {
  auto q = index_of(word);
  if (!q || m == 0) return {};
  const auto qv = row(*q);
  std::vector<Neighbor> all;
  all.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (i == *q) continue;
    all.push_back({words_[i], cosine_with_norms(qv, norms_[*q], row(i), norms_[i])});
  }
  auto order = [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.word < b.word;
  };
  const std::size_t k = std::min(m, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), order);
  all.resize(k);
  return all;
}

std::vector<std::string> EmbeddingStore::nearest(std::string_view word, std::size_t m) const {
  std::vector<std::string> out;
  for (auto& n : nearest_with_scores(word, m)) out.push_back(std::move(n.word));
  return out;
}

SentenceEmbedding EmbeddingStore::sentence_embed(std::span<const std::string> tokens) const {
  SentenceEmbedding out;
  out.vector.assign(dim_, 0.0);
  std::size_t found = 0;
  for (const auto& t : tokens) {
    auto i = index_of(t);
    if (!i) continue;
    ++found;
    const auto r = row(*i);
    for (std::size_t d = 0; d < dim_; ++d) out.vector[d] += r[d];
  }
  if (found == 0) return out;
  for (auto& x : out.vector) x /= static_cast<double>(found);
  out.coverage = static_cast<double>(found) / static_cast<double>(tokens.size());
  return out;
}

double EmbeddingStore::sentence_similarity(std::span<const std::string> a,
                                           std::span<const std::string> b) const {
  const auto ea = sentence_embed(a);
  const auto eb = sentence_embed(b);
  if (ea.coverage == 0.0 || eb.coverage == 0.0) return 0.0;
  return cosine(ea.vector, eb.vector);
}

EmbeddingStore load_vectors(std::istream& in) {
  EmbeddingStore store;
  std::string line;
  std::size_t lineno = 0;
  bool first_content = true;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (first_content) {
      first_content = false;
      if (fields.size() == 2 && is_integer(fields[0]) && is_integer(fields[1])) continue;
    }
    if (fields.size() < 2) throw EmbeddingFormatError(lineno, "word without vector components");
    values.clear();
    for (std::size_t f = 1; f < fields.size(); ++f) {
      double v;
      auto [p, ec] = std::from_chars(fields[f].data(), fields[f].data() + fields[f].size(), v);
      if (ec != std::errc() || p != fields[f].data() + fields[f].size() || !std::isfinite(v)) {
        throw EmbeddingFormatError(lineno, "unparsable component '" + std::string(fields[f]) + "'");
      }
      values.push_back(v);
    }
    if (store.dim_ == 0) store.dim_ = values.size();
    if (values.size() != store.dim_) {
      throw EmbeddingFormatError(lineno, "expected " + std::to_string(store.dim_) +
                                             " components, got " + std::to_string(values.size()));
    }
    store.add(std::string(fields[0]), values, lineno);
  }
  if (store.size() == 0) throw EmbeddingFormatError(lineno, "no word vectors in input");
  return store;
}

EmbeddingStore load_vectors_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings file: " + path);
  return load_vectors(in);
}

}  // namespace pivot
