#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pivot {

class EmbeddingFormatError : public std::runtime_error {
 public:
  EmbeddingFormatError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// cos(u, v); 0 when either vector has zero norm. Throws std::invalid_argument
// on a dimension mismatch.
double cosine(std::span<const double> u, std::span<const double> v);

struct SentenceEmbedding {
  std::vector<double> vector;
  // Fraction of tokens found in the vocabulary.
  double coverage = 0.0;
};

struct Neighbor {
  std::string word;
  double similarity = 0.0;
};

// Immutable word-vector table. Vectors are stored row-major in one buffer.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  // Words and vectors in parallel; throws on zero-norm or ragged vectors.
  // Duplicate words keep the first occurrence.
  EmbeddingStore(std::vector<std::string> words, const std::vector<std::vector<double>>& vectors);

  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  bool contains(std::string_view word) const;
  const std::vector<std::string>& words() const { return words_; }

  // Empty span for out-of-vocabulary words.
  std::span<const double> vector(std::string_view word) const;

  // The m most cosine-similar vocabulary words, excluding `word` itself;
  // ties broken lexicographically. Brute-force scan. Empty when OOV.
  std::vector<Neighbor> nearest_with_scores(std::string_view word, std::size_t m) const;
  std::vector<std::string> nearest(std::string_view word, std::size_t m) const;

  // Mean of in-vocabulary token vectors; the mask symbol is always OOV.
  SentenceEmbedding sentence_embed(std::span<const std::string> tokens) const;

  // cos(embed(a), embed(b)), 0 when either side has no coverage.
  double sentence_similarity(std::span<const std::string> a, std::span<const std::string> b) const;

 private:
  friend EmbeddingStore load_vectors(std::istream&);
  void add(std::string word, std::span<const double> v, std::size_t line);
  std::optional<std::size_t> index_of(std::string_view word) const;
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<double> data_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Reads "word v1 ... vd" lines (the counter-fitted vector text format). The
// dimension comes from the first vector line; a first line of exactly two
// integers is taken as a "count dim" header and skipped.
EmbeddingStore load_vectors(std::istream& in);
EmbeddingStore load_vectors_file(const std::string& path);

}  // namespace pivot
