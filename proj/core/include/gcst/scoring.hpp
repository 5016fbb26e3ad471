#pragma once

#include <unordered_map>
#include <vector>

#include "gcst/encoder.hpp"
#include "gcst/tokenizer.hpp"
#include "gcst/types.hpp"

namespace gcst {

// Label prompts are embedded with the same encoder as the documents and are
// re-encoded whenever the parameters change.
std::vector<EmbeddingVector> encode_label_prompts(
    const ToyEncoderParams& params, const Tokenizer& tokenizer,
    const LabelSchema& schema);

SimilarityRow score(const EmbeddingVector& x,
                    const std::vector<EmbeddingVector>& prompt_embeddings,
                    SimilarityKind kind);

/// Predicted label of a similarity row: argmax, lowest index on ties.
int predict(const SimilarityRow& row);

// softmax(row), guarded by max-subtraction; finite input never yields NaN.
PredictionDistribution prediction_distribution(const SimilarityRow& row);

// softmax(row / tau) for tau in (0, 1]; tau = 1 reproduces the prediction
// distribution, smaller tau sharpens it.
SoftTarget soft_target(const SimilarityRow& row, double tau);

struct MergeOptions {
  // When set, the bare original text joins the ensemble alongside the
  // concatenated variants.
  bool include_original = false;
};

/// Mean embedding of the original text concatenated with each generated
/// piece; truncation applies after concatenation so the original prefix
/// survives. Throws when the augmentation set is empty.
EmbeddingVector merged_embedding(const Document& base,
                                 const AugmentationSet& augs,
                                 const ToyEncoderParams& params,
                                 const Tokenizer& tokenizer,
                                 const MergeOptions& opts = {});

using InputAugMap = std::unordered_map<std::string, AugmentationSet>;

// Singleton empty-string augmentation per document: the merged embedding
// degenerates to the plain encoding, which is how augmentation is disabled.
InputAugMap disabled_augmentations(const std::vector<Document>& corpus);

struct PseudoLabelOutcome {
  PseudoLabeledPair pair;
  SoftTarget target;
};

/// One full labeling pass: merged embedding -> similarity row -> pseudo-label
/// (argmax) and soft target; confidence is the top entry of the prediction
/// distribution. Output order follows the corpus.
std::vector<PseudoLabelOutcome> pseudo_label_corpus(
    const std::vector<Document>& corpus, const LabelSchema& schema,
    const ToyEncoderParams& params, const Tokenizer& tokenizer,
    const InputAugMap& augmentations, SimilarityKind kind, double tau,
    const MergeOptions& opts = {});

}  // namespace gcst
