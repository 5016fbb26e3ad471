#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "gcst/types.hpp"

namespace gcst {

enum class SimilarityKind { dot, cosine };

/// Desk-scale sentence encoder: mean-pooled embedding lookup followed by one
/// linear projection. f(x) = projection^T * mean(embedding rows of tokens).
/// Small enough that every training loss has closed-form gradients.
struct ToyEncoderParams {
  Eigen::MatrixXd embedding_table;  // V x H
  Eigen::MatrixXd projection;       // H x D
  std::uint64_t theta_version = 0;

  std::size_t vocab_size() const {
    return static_cast<std::size_t>(embedding_table.rows());
  }
  std::size_t hidden_dim() const {
    return static_cast<std::size_t>(embedding_table.cols());
  }
  std::size_t embed_dim() const {
    return static_cast<std::size_t>(projection.cols());
  }
};

// Embedding entries uniform in [-scale, scale); projection initialized near
// identity (ones on the main diagonal, small uniform noise elsewhere) so an
// untrained encoder already behaves like a bag-of-words matcher.
ToyEncoderParams init_encoder_params(std::size_t vocab_size,
                                     std::size_t hidden_dim,
                                     std::size_t embed_dim,
                                     std::uint64_t seed, double scale = 0.2,
                                     double projection_noise = 0.01);

EmbeddingVector encode(const ToyEncoderParams& params,
                       const std::vector<int>& tokens);

std::vector<EmbeddingVector> encode_batch(
    const ToyEncoderParams& params,
    const std::vector<std::vector<int>>& token_lists);

double similarity(const EmbeddingVector& a, const EmbeddingVector& b,
                  SimilarityKind kind);

struct ParamGrads {
  Eigen::MatrixXd embedding_table;
  Eigen::MatrixXd projection;

  static ParamGrads zeros_like(const ToyEncoderParams& params);
  ParamGrads& operator+=(const ParamGrads& other);
  bool all_finite() const;
};

// In-place SGD step: params -= lr * grads, theta_version incremented.
// Single writer; readers must not run concurrently with an update.
void apply_gradients(ToyEncoderParams& params, const ParamGrads& grads,
                     double lr);

// Textual checkpoint with header {V, H, D, theta_version}; values carry 17
// significant digits so a save/load round trip is bit-exact.
void save_params(const ToyEncoderParams& params,
                 const std::filesystem::path& path);
ToyEncoderParams load_params(const std::filesystem::path& path);

}  // namespace gcst
