#include "gcst/encoder.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "gcst/rng.hpp"

namespace gcst {

ToyEncoderParams init_encoder_params(std::size_t vocab_size,
                                     std::size_t hidden_dim,
                                     std::size_t embed_dim, std::uint64_t seed,
                                     double scale, double projection_noise) {
  if (vocab_size == 0 || hidden_dim == 0 || embed_dim == 0) {
    throw_invalid("init_encoder_params: dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  ToyEncoderParams params;
  params.embedding_table.resize(static_cast<Eigen::Index>(vocab_size),
                                static_cast<Eigen::Index>(hidden_dim));
  for (Eigen::Index r = 0; r < params.embedding_table.rows(); ++r) {
    for (Eigen::Index c = 0; c < params.embedding_table.cols(); ++c) {
      params.embedding_table(r, c) = uniform_range(rng, -scale, scale);
    }
  }
  // Row 0 is the out-of-vocabulary slot. Starting it at zero makes unknown
  // words dilute a mean-pooled embedding instead of steering every text
  // toward one shared random direction.
  params.embedding_table.row(0).setZero();
  params.projection.resize(static_cast<Eigen::Index>(hidden_dim),
                           static_cast<Eigen::Index>(embed_dim));
  for (Eigen::Index r = 0; r < params.projection.rows(); ++r) {
    for (Eigen::Index c = 0; c < params.projection.cols(); ++c) {
      double noise = uniform_range(rng, -projection_noise, projection_noise);
      params.projection(r, c) = (r == c ? 1.0 : 0.0) + noise;
    }
  }
  return params;
}

EmbeddingVector encode(const ToyEncoderParams& params,
                       const std::vector<int>& tokens) {
  if (tokens.empty()) {
    throw_invalid("encode: empty token sequence");
  }
  const auto vocab = static_cast<int>(params.vocab_size());
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(params.embedding_table.cols());
  for (int t : tokens) {
    if (t < 0 || t >= vocab) {
      throw_invalid("encode: token index " + std::to_string(t) +
                    " outside vocabulary of size " + std::to_string(vocab));
    }
    pooled += params.embedding_table.row(t);
  }
  pooled /= static_cast<double>(tokens.size());
  return params.projection.transpose() * pooled;
}

std::vector<EmbeddingVector> encode_batch(
    const ToyEncoderParams& params,
    const std::vector<std::vector<int>>& token_lists) {
  std::vector<EmbeddingVector> out;
  out.reserve(token_lists.size());
  for (std::size_t i = 0; i < token_lists.size(); ++i) {
    try {
      out.push_back(encode(params, token_lists[i]));
    } catch (const Error& e) {
      throw Error(e.code(), "encode_batch: element " + std::to_string(i) +
                                ": " + e.what());
    }
  }
  return out;
}

double similarity(const EmbeddingVector& a, const EmbeddingVector& b,
                  SimilarityKind kind) {
  if (a.size() != b.size()) {
    throw_invalid("similarity: dimension mismatch (" + std::to_string(a.size()) +
                  " vs " + std::to_string(b.size()) + ")");
  }
  const double dot = a.dot(b);
  if (kind == SimilarityKind::dot) {
    return dot;
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    throw_invalid("similarity: cosine undefined for a zero vector");
  }
  return dot / (na * nb);
}

ParamGrads ParamGrads::zeros_like(const ToyEncoderParams& params) {
  ParamGrads g;
  g.embedding_table = Eigen::MatrixXd::Zero(params.embedding_table.rows(),
                                            params.embedding_table.cols());
  g.projection =
      Eigen::MatrixXd::Zero(params.projection.rows(), params.projection.cols());
  return g;
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& other) {
  if (embedding_table.size() == 0) {
    embedding_table = other.embedding_table;
    projection = other.projection;
    return *this;
  }
  embedding_table += other.embedding_table;
  projection += other.projection;
  return *this;
}

bool ParamGrads::all_finite() const {
  return embedding_table.allFinite() && projection.allFinite();
}

void apply_gradients(ToyEncoderParams& params, const ParamGrads& grads,
                     double lr) {
  if (!(lr > 0.0)) {
    throw_invalid("apply_gradients: learning rate must be positive");
  }
  if (grads.embedding_table.rows() != params.embedding_table.rows() ||
      grads.embedding_table.cols() != params.embedding_table.cols() ||
      grads.projection.rows() != params.projection.rows() ||
      grads.projection.cols() != params.projection.cols()) {
    throw_invalid("apply_gradients: gradient shape mismatch");
  }
  if (!grads.all_finite()) {
    throw_invalid("apply_gradients: non-finite gradient");
  }
  params.embedding_table -= lr * grads.embedding_table;
  params.projection -= lr * grads.projection;
  ++params.theta_version;
}

namespace {

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
      out << buf << (c + 1 == m.cols() ? "" : " ");
    }
    out << "\n";
  }
}

}  // namespace

void save_params(const ToyEncoderParams& params,
                 const std::filesystem::path& path) {
  std::ostringstream body;
  body << "toyencoder v1\n"
       << params.vocab_size() << " " << params.hidden_dim() << " "
       << params.embed_dim() << " " << params.theta_version << "\n";
  write_matrix(body, params.embedding_table);
  write_matrix(body, params.projection);

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::io_error,
                  "save_params: cannot open " + path.string());
    }
    out << body.str();
  }
  std::filesystem::rename(tmp, path);
}

ToyEncoderParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::io_error, "load_params: cannot open " + path.string());
  }
  std::string magic, version;
  in >> magic >> version;
  if (magic != "toyencoder" || version != "v1") {
    throw Error(ErrorCode::parse_error,
                "load_params: unrecognized header in " + path.string());
  }
  std::size_t v = 0, h = 0, d = 0;
  std::uint64_t theta = 0;
  in >> v >> h >> d >> theta;
  if (!in || v == 0 || h == 0 || d == 0) {
    throw Error(ErrorCode::parse_error,
                "load_params: bad dimensions in " + path.string());
  }
  ToyEncoderParams params;
  params.theta_version = theta;
  params.embedding_table.resize(static_cast<Eigen::Index>(v),
                                static_cast<Eigen::Index>(h));
  params.projection.resize(static_cast<Eigen::Index>(h),
                           static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < params.embedding_table.rows(); ++r) {
    for (Eigen::Index c = 0; c < params.embedding_table.cols(); ++c) {
      in >> params.embedding_table(r, c);
    }
  }
  for (Eigen::Index r = 0; r < params.projection.rows(); ++r) {
    for (Eigen::Index c = 0; c < params.projection.cols(); ++c) {
      in >> params.projection(r, c);
    }
  }
  if (!in) {
    throw Error(ErrorCode::parse_error,
                "load_params: truncated matrix data in " + path.string());
  }
  return params;
}

}  // namespace gcst
