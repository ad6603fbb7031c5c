#include "lira/provider.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lira/errors.hpp"

namespace lira::data {

namespace {

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
  std::uint64_t h = 14695981039346656037ull ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double unit_double(std::uint64_t bits) {
  // [-1, 1)
  return static_cast<double>(bits >> 11) / 4503599627370496.0 - 1.0;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::istringstream iss(text);
  std::vector<std::string> tokens;
  std::string tok;
  while (iss >> tok) tokens.push_back(tok);
  return tokens;
}

DenseVector EmbeddingProvider::embed(const std::string& text) const {
  auto toks = tokenize(text);
  if (toks.empty()) throw DataError("embed: empty text");
  auto rows = token_embeddings(toks);
  std::vector<int> mask(rows.size(), 1);
  return num::mean_pool(rows, mask);
}

HashProjectionProvider::HashProjectionProvider(std::size_t dim,
                                               std::uint64_t seed,
                                               bool share_concepts)
    : dim_(dim), seed_(seed), share_concepts_(share_concepts) {
  if (dim == 0) throw ConfigError("HashProjectionProvider: zero dimension");
}

std::vector<DenseVector> HashProjectionProvider::token_embeddings(
    const std::vector<std::string>& tokens) const {
  std::vector<DenseVector> rows;
  rows.reserve(tokens.size());
  for (const auto& t : tokens) {
    std::string key = t;
    if (share_concepts_) {
      // Synthetic concept tokens look like "<lang>_c<id>"; sharing the
      // concept across languages emulates a multilingual encoder.
      const auto us = t.find('_');
      if (us != std::string::npos && us + 1 < t.size() && t[us + 1] == 'c') {
        key = t.substr(us + 1);
      }
    }
    std::uint64_t state = fnv1a(key, seed_);
    DenseVector v(dim_);
    for (std::size_t j = 0; j < dim_; ++j) v[j] = unit_double(splitmix64(state));
    rows.push_back(std::move(v));
  }
  return rows;
}

FileBackedProvider::FileBackedProvider(const std::string& path, std::size_t dim)
    : dim_(dim) {
  std::ifstream in(path);
  if (!in) throw DataError("FileBackedProvider: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("FileBackedProvider: parse error in " + path + ": " + e.what());
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    DenseVector v = it.value().get<DenseVector>();
    if (v.size() != dim_) {
      throw DataError("FileBackedProvider: wrong dimension for '" + it.key() + "'");
    }
    table_[it.key()] = std::move(v);
  }
}

DenseVector FileBackedProvider::embed(const std::string& text) const {
  auto it = table_.find(text);
  if (it == table_.end()) {
    throw DataError("FileBackedProvider: no embedding for '" + text + "'");
  }
  return it->second;
}

std::vector<DenseVector> FileBackedProvider::token_embeddings(
    const std::vector<std::string>& tokens) const {
  std::string text;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) text += ' ';
    text += tokens[i];
  }
  return {embed(text)};
}

TrainableEncoder::TrainableEncoder(const std::vector<std::string>& vocab,
                                   std::size_t token_dim, std::size_t out_dim,
                                   std::uint64_t seed)
    : token_dim_(token_dim), out_dim_(out_dim) {
  if (token_dim == 0 || out_dim == 0) {
    throw ConfigError("TrainableEncoder: zero dimension");
  }
  std::size_t next = 1;  // 0 is the OOV row
  for (const auto& t : vocab) {
    if (vocab_.emplace(t, next).second) ++next;
  }
  const std::size_t rows = next;
  w_offset_ = rows * token_dim_;
  b_offset_ = w_offset_ + out_dim_ * token_dim_;
  params_.assign(b_offset_ + out_dim_, 0.0);
  // Symmetric uniform init scaled by 1/sqrt(fan_in); biases zero.
  std::uint64_t state = seed ^ 0x5851f42d4c957f2dull;
  const double table_scale = 1.0 / std::sqrt(static_cast<double>(token_dim_));
  for (std::size_t i = 0; i < w_offset_; ++i) {
    params_[i] = unit_double(splitmix64(state)) * table_scale;
  }
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(token_dim_));
  for (std::size_t i = w_offset_; i < b_offset_; ++i) {
    params_[i] = unit_double(splitmix64(state)) * w_scale;
  }
}

void TrainableEncoder::set_params(const DenseVector& p) {
  if (p.size() != params_.size()) throw ConfigError("TrainableEncoder: param size mismatch");
  params_ = p;
}

std::size_t TrainableEncoder::token_id(const std::string& tok) const {
  auto it = vocab_.find(tok);
  return it == vocab_.end() ? 0 : it->second;
}

const double* TrainableEncoder::table_row(std::size_t id) const {
  return params_.data() + id * token_dim_;
}

std::vector<DenseVector> TrainableEncoder::token_embeddings(
    const std::vector<std::string>& tokens) const {
  std::vector<DenseVector> rows;
  rows.reserve(tokens.size());
  for (const auto& t : tokens) {
    const double* r = table_row(token_id(t));
    rows.emplace_back(r, r + token_dim_);
  }
  return rows;
}

DenseVector TrainableEncoder::embed(const std::string& text) const {
  auto toks = tokenize(text);
  if (toks.empty()) throw DataError("TrainableEncoder: empty text");
  DenseVector pooled(token_dim_, 0.0);
  for (const auto& t : toks) {
    const double* r = table_row(token_id(t));
    for (std::size_t j = 0; j < token_dim_; ++j) pooled[j] += r[j];
  }
  for (double& x : pooled) x /= static_cast<double>(toks.size());
  DenseVector out(out_dim_, 0.0);
  const double* w = params_.data() + w_offset_;
  const double* b = params_.data() + b_offset_;
  for (std::size_t o = 0; o < out_dim_; ++o) {
    double acc = b[o];
    for (std::size_t j = 0; j < token_dim_; ++j) acc += w[o * token_dim_ + j] * pooled[j];
    out[o] = acc;
  }
  return out;
}

void TrainableEncoder::accumulate_grad(const std::string& text,
                                       const DenseVector& grad_out,
                                       DenseVector& grad_params) const {
  if (grad_out.size() != out_dim_ || grad_params.size() != params_.size()) {
    throw ConfigError("TrainableEncoder: gradient size mismatch");
  }
  auto toks = tokenize(text);
  if (toks.empty()) throw DataError("TrainableEncoder: empty text");
  DenseVector pooled(token_dim_, 0.0);
  for (const auto& t : toks) {
    const double* r = table_row(token_id(t));
    for (std::size_t j = 0; j < token_dim_; ++j) pooled[j] += r[j];
  }
  for (double& x : pooled) x /= static_cast<double>(toks.size());

  const double* w = params_.data() + w_offset_;
  double* gw = grad_params.data() + w_offset_;
  double* gb = grad_params.data() + b_offset_;
  DenseVector gpooled(token_dim_, 0.0);
  for (std::size_t o = 0; o < out_dim_; ++o) {
    gb[o] += grad_out[o];
    for (std::size_t j = 0; j < token_dim_; ++j) {
      gw[o * token_dim_ + j] += grad_out[o] * pooled[j];
      gpooled[j] += grad_out[o] * w[o * token_dim_ + j];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(toks.size());
  for (const auto& t : toks) {
    double* ge = grad_params.data() + token_id(t) * token_dim_;
    for (std::size_t j = 0; j < token_dim_; ++j) ge[j] += gpooled[j] * inv_n;
  }
}

void TrainableEncoder::accumulate_token_grad(
    const std::vector<std::string>& tokens,
    const std::vector<DenseVector>& grads, DenseVector& grad_params) const {
  if (tokens.size() != grads.size() || grad_params.size() != params_.size()) {
    throw ConfigError("TrainableEncoder: token gradient size mismatch");
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    double* ge = grad_params.data() + token_id(tokens[i]) * token_dim_;
    for (std::size_t j = 0; j < token_dim_; ++j) ge[j] += grads[i][j];
  }
}

}  // namespace lira::data
