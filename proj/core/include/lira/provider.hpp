#ifndef LIRA_PROVIDER_HPP_
#define LIRA_PROVIDER_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lira/numcore.hpp"

namespace lira::data {

using num::DenseVector;

std::vector<std::string> tokenize(const std::string& text);

// Stand-in for a sentence encoder backbone. Deterministic providers return
// bit-identical embeddings for the same text across calls and runs.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual bool deterministic() const { return true; }
  // One row per token, uniform mask of ones for whitespace tokens.
  virtual std::vector<DenseVector> token_embeddings(
      const std::vector<std::string>& tokens) const = 0;
  // Sentence embedding; default is the unnormalized mean pool of token rows.
  virtual DenseVector embed(const std::string& text) const;
};

// Untrainable baseline: each token maps to a fixed pseudorandom vector
// derived from an FNV-1a hash of the token and the seed; sentence embedding
// is the bag-of-tokens mean.
class HashProjectionProvider : public EmbeddingProvider {
 public:
  HashProjectionProvider(std::size_t dim, std::uint64_t seed,
                         bool share_concepts = false);
  std::string name() const override { return "hash-projection"; }
  std::size_t dimension() const override { return dim_; }
  std::vector<DenseVector> token_embeddings(
      const std::vector<std::string>& tokens) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  bool share_concepts_;
};

// Embeddings read from a JSON file mapping text -> vector.
class FileBackedProvider : public EmbeddingProvider {
 public:
  FileBackedProvider(const std::string& path, std::size_t dim);
  std::string name() const override { return "file-backed"; }
  std::size_t dimension() const override { return dim_; }
  std::vector<DenseVector> token_embeddings(
      const std::vector<std::string>& tokens) const override;
  DenseVector embed(const std::string& text) const override;

 private:
  std::size_t dim_;
  std::map<std::string, DenseVector> table_;
};

// Fully differentiable toy encoder: per-token embedding table, mean pooled,
// then one affine layer. Parameters live in a flat vector
// [E (V+1 x d_tok), W (d_out x d_tok), b (d_out)]; row 0 of E is the OOV row.
class TrainableEncoder : public EmbeddingProvider {
 public:
  TrainableEncoder(const std::vector<std::string>& vocab, std::size_t token_dim,
                   std::size_t out_dim, std::uint64_t seed);

  std::string name() const override { return "trainable-toy"; }
  std::size_t dimension() const override { return out_dim_; }
  std::vector<DenseVector> token_embeddings(
      const std::vector<std::string>& tokens) const override;
  DenseVector embed(const std::string& text) const override;

  DenseVector& params() { return params_; }
  const DenseVector& params() const { return params_; }
  void set_params(const DenseVector& p);
  std::size_t param_count() const { return params_.size(); }

  // d embed(text) / d params, contracted with grad_out, added to grad_params.
  void accumulate_grad(const std::string& text, const DenseVector& grad_out,
                       DenseVector& grad_params) const;
  // Token-level path: adds per-token upstream grads onto the table rows.
  void accumulate_token_grad(const std::vector<std::string>& tokens,
                             const std::vector<DenseVector>& grads,
                             DenseVector& grad_params) const;

  std::size_t token_dim() const { return token_dim_; }

 private:
  std::size_t token_id(const std::string& tok) const;
  const double* table_row(std::size_t id) const;

  std::map<std::string, std::size_t> vocab_;
  std::size_t token_dim_, out_dim_;
  DenseVector params_;
  std::size_t w_offset_, b_offset_;
};

}  // namespace lira::data

#endif  // LIRA_PROVIDER_HPP_
