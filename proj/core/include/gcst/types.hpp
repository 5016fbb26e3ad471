#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "gcst/error.hpp"

namespace gcst {

using EmbeddingVector = Eigen::VectorXd;

// Similarity of one text against every label prompt, in schema order.
using SimilarityRow = Eigen::VectorXd;

struct Document {
  std::string id;
  std::string text;
  std::vector<int> tokens;
};

enum class PromptTemplate { category, about };

/// Renders a label description as a full sentence: "Category: <label>." or
/// "It is about <label>.". Throws on an empty description.
std::string render_label_prompt(const std::string& description,
                                PromptTemplate tpl);

struct LabelSchema {
  std::vector<std::string> descriptions;
  std::vector<std::string> prompts;

  std::size_t count() const { return descriptions.size(); }
};

LabelSchema make_schema(const std::vector<std::string>& descriptions,
                        PromptTemplate tpl);

/// Throws Error(invalid_argument) naming the violated invariant:
/// mismatched list lengths, duplicate descriptions, or fewer than two labels.
void validate_schema(const LabelSchema& schema);

struct PredictionDistribution {
  Eigen::VectorXd probs;
  int predicted = 0;  // argmax; lowest index wins ties
};

struct SoftTarget {
  Eigen::VectorXd weights;
  double tau = 1.0;
};

struct PseudoLabeledPair {
  std::size_t doc_index = 0;
  std::string doc_id;
  int pseudo_label = 0;
  double confidence = 0.0;  // max entry of P at assignment time
};

enum class AugmentationKind { input, conditional };

struct AugmentationSet {
  std::string doc_id;
  AugmentationKind kind = AugmentationKind::input;
  std::optional<int> pseudo_label;  // present iff kind == conditional
  std::vector<std::string> texts;
};

// Text concatenation used for augmented inputs: one space between the
// original and the generated piece.
inline std::string concat_text(const std::string& base,
                               const std::string& extension) {
  return base + " " + extension;
}

int argmax_lowest_index(const Eigen::VectorXd& values);

}  // namespace gcst
