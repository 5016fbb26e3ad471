#pragma once

#include <map>
#include <string>
#include <vector>

#include "gcst/encoder.hpp"
#include "gcst/scoring.hpp"
#include "gcst/tokenizer.hpp"
#include "gcst/types.hpp"

namespace gcst {

struct LossReport {
  double value = 0.0;
  ParamGrads grads;
  std::map<std::string, double> components;
};

/// One instance of the text-to-label family: a token sequence plus a fixed
/// target distribution. Targets are constants here — no gradient flows
/// through them, which is also what makes the finite-difference checks of
/// the analytic gradients well-posed.
struct TargetedInstance {
  std::vector<int> tokens;
  SoftTarget target;
};

/// Cross-entropy between the fixed targets and the model's label
/// distribution, summed over instances:
///   -sum_i sum_c target[i][c] * log P(c | instance i).
/// Gradients cover both the instance embeddings and the label prompt
/// embeddings (prompts are encoded by the same parameters).
LossReport loss_t2l(const std::vector<TargetedInstance>& instances,
                    const ToyEncoderParams& params, const Tokenizer& tokenizer,
                    const LabelSchema& schema, SimilarityKind kind, double tau);

struct ConditionalInstance {
  std::vector<int> tokens;  // original text ⊕ one conditional generation
  SoftTarget target;        // recomputed on the concatenated text
};

struct BatchItem {
  std::size_t doc_index = 0;
  std::string doc_id;
  int pseudo_label = 0;
  std::vector<int> tokens;  // original text
  SoftTarget target;        // from the pseudo-labeling pass
  // Original ⊕ each input-augmentation piece; positives for the
  // text-to-generated loss.
  std::vector<std::vector<int>> augmented;
  std::vector<ConditionalInstance> conditionals;
};

struct BatchSpec {
  std::vector<BatchItem> items;
  double tau = 0.1;
};

/// Same objective as loss_t2l evaluated on the conditionally generated
/// texts, whose targets were recomputed on those texts. Throws when an item
/// carries no conditional instance.
LossReport loss_g2l(const BatchSpec& batch, const ToyEncoderParams& params,
                    const Tokenizer& tokenizer, const LabelSchema& schema,
                    SimilarityKind kind);

/// Contrastive loss between each batch text and its group of augmented
/// texts:
///   sum_i (-1/|A(i)|) sum_{a in A(i)}
///       log( exp(sim(f(x_i), f(a))) / sum_{j in batch} exp(sim(f(x_i), f(x_j))) )
/// The denominator ranges over the batch originals only. groups[i] must be
/// nonempty for every i.
LossReport loss_t2g(const std::vector<std::vector<int>>& originals,
                    const std::vector<std::vector<std::vector<int>>>& groups,
                    const ToyEncoderParams& params, SimilarityKind kind);

/// A(i) for a batch: every augmented text whose owning item carries the same
/// pseudo-label as item i.
std::vector<std::vector<std::vector<int>>> t2g_groups(const BatchSpec& batch);

LossReport loss_t2g(const BatchSpec& batch, const ToyEncoderParams& params,
                    SimilarityKind kind);

/// Training objective: g2l + t2g, with the gradient bundle summed.
LossReport composite_loss(const BatchSpec& batch,
                          const ToyEncoderParams& params,
                          const Tokenizer& tokenizer, const LabelSchema& schema,
                          SimilarityKind kind);

using ConditionalAugKey = std::pair<std::string, int>;  // (doc id, label)
using ConditionalAugMap = std::map<ConditionalAugKey, AugmentationSet>;

/// Builds a training batch from selected pseudo-labeled members: tokenizes
/// the concatenations and recomputes each conditional instance's target at
/// the given parameters. Targets stay fixed for the lifetime of the batch.
BatchSpec assemble_batch(const std::vector<PseudoLabelOutcome>& members,
                         const std::vector<Document>& corpus,
                         const InputAugMap& input_augs,
                         const ConditionalAugMap& conditional_augs,
                         const ToyEncoderParams& params,
                         const Tokenizer& tokenizer, const LabelSchema& schema,
                         SimilarityKind kind, double tau);

}  // namespace gcst
