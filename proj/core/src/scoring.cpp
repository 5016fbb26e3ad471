#include "gcst/scoring.hpp"

#include <cmath>

namespace gcst {

std::vector<EmbeddingVector> encode_label_prompts(
    const ToyEncoderParams& params, const Tokenizer& tokenizer,
    const LabelSchema& schema) {
  std::vector<EmbeddingVector> out;
  out.reserve(schema.count());
  for (const auto& prompt : schema.prompts) {
    out.push_back(encode(params, tokenizer.tokenize(prompt)));
  }
  return out;
}

SimilarityRow score(const EmbeddingVector& x,
                    const std::vector<EmbeddingVector>& prompt_embeddings,
                    SimilarityKind kind) {
  SimilarityRow row(static_cast<Eigen::Index>(prompt_embeddings.size()));
  for (std::size_t c = 0; c < prompt_embeddings.size(); ++c) {
    row[static_cast<Eigen::Index>(c)] = similarity(x, prompt_embeddings[c], kind);
  }
  return row;
}

int predict(const SimilarityRow& row) {
  if (row.size() == 0) {
    throw_invalid("predict: empty similarity row");
  }
  return argmax_lowest_index(row);
}

namespace {

Eigen::VectorXd stable_softmax(const SimilarityRow& row, double tau) {
  const double m = row.maxCoeff();
  Eigen::VectorXd w(row.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    w[i] = std::exp((row[i] - m) / tau);
    sum += w[i];
  }
  w /= sum;
  return w;
}

}  // namespace

PredictionDistribution prediction_distribution(const SimilarityRow& row) {
  if (row.size() == 0) {
    throw_invalid("prediction_distribution: empty similarity row");
  }
  if (!row.allFinite()) {
    throw_invalid("prediction_distribution: non-finite similarity");
  }
  PredictionDistribution dist;
  dist.probs = stable_softmax(row, 1.0);
  dist.predicted = argmax_lowest_index(dist.probs);
  return dist;
}

SoftTarget soft_target(const SimilarityRow& row, double tau) {
  if (!(tau > 0.0) || tau > 1.0) {
    throw_invalid("soft_target: tau must lie in (0, 1]");
  }
  if (row.size() == 0 || !row.allFinite()) {
    throw_invalid("soft_target: invalid similarity row");
  }
  SoftTarget target;
  target.tau = tau;
  target.weights = stable_softmax(row, tau);
  return target;
}

EmbeddingVector merged_embedding(const Document& base,
                                 const AugmentationSet& augs,
                                 const ToyEncoderParams& params,
                                 const Tokenizer& tokenizer,
                                 const MergeOptions& opts) {
  if (augs.texts.empty()) {
    throw_invalid("merged_embedding: empty augmentation set for document '" +
                  base.id + "'");
  }
  EmbeddingVector sum =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.embed_dim()));
  std::size_t members = 0;
  if (opts.include_original) {
    sum += encode(params, tokenizer.tokenize(base.text));
    ++members;
  }
  for (const auto& text : augs.texts) {
    sum += encode(params, tokenizer.tokenize(concat_text(base.text, text)));
    ++members;
  }
  return sum / static_cast<double>(members);
}

InputAugMap disabled_augmentations(const std::vector<Document>& corpus) {
  InputAugMap map;
  map.reserve(corpus.size());
  for (const auto& doc : corpus) {
    AugmentationSet set;
    set.doc_id = doc.id;
    set.kind = AugmentationKind::input;
    set.texts = {""};
    map.emplace(doc.id, std::move(set));
  }
  return map;
}

std::vector<PseudoLabelOutcome> pseudo_label_corpus(
    const std::vector<Document>& corpus, const LabelSchema& schema,
    const ToyEncoderParams& params, const Tokenizer& tokenizer,
    const InputAugMap& augmentations, SimilarityKind kind, double tau,
    const MergeOptions& opts) {
  const auto prompts = encode_label_prompts(params, tokenizer, schema);
  std::vector<PseudoLabelOutcome> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& doc = corpus[i];
    auto it = augmentations.find(doc.id);
    if (it == augmentations.end()) {
      throw_invalid("pseudo_label_corpus: no augmentation set for document '" +
                    doc.id + "'");
    }
    const EmbeddingVector emb =
        merged_embedding(doc, it->second, params, tokenizer, opts);
    const SimilarityRow row = score(emb, prompts, kind);
    const PredictionDistribution dist = prediction_distribution(row);

    PseudoLabelOutcome outcome;
    outcome.pair.doc_index = i;
    outcome.pair.doc_id = doc.id;
    outcome.pair.pseudo_label = dist.predicted;
    outcome.pair.confidence = dist.probs[dist.predicted];
    outcome.target = soft_target(row, tau);
    out.push_back(std::move(outcome));
  }
  return out;
}

}  // namespace gcst
