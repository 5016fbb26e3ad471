#include "gcst/losses.hpp"

#include <cmath>

namespace gcst {

namespace {

// One encoded text participating in a loss: forward activations plus the
// accumulated dL/d(embedding). Gradients reach the parameters through
// finalize() — both through the instance texts and through the label
// prompts, since the same encoder embeds both.
struct EncodeSlot {
  const std::vector<int>* tokens = nullptr;
  Eigen::VectorXd pooled;     // mean embedding rows
  EmbeddingVector embedding;  // projection^T * pooled
  EmbeddingVector grad;       // dL/d(embedding)
};

EncodeSlot make_slot(const ToyEncoderParams& params,
                     const std::vector<int>& tokens) {
  EncodeSlot slot;
  slot.tokens = &tokens;
  if (tokens.empty()) {
    throw_invalid("loss: empty token sequence");
  }
  const auto vocab = static_cast<int>(params.vocab_size());
  slot.pooled = Eigen::VectorXd::Zero(params.embedding_table.cols());
  for (int t : tokens) {
    if (t < 0 || t >= vocab) {
      throw_invalid("loss: token index out of range");
    }
    slot.pooled += params.embedding_table.row(t);
  }
  slot.pooled /= static_cast<double>(tokens.size());
  slot.embedding = params.projection.transpose() * slot.pooled;
  slot.grad = Eigen::VectorXd::Zero(slot.embedding.size());
  return slot;
}

// d(sim)/d(embedding) for both arguments, scaled by the upstream factor.
// Works when a and b alias the same slot: both contributions land there.
void backprop_similarity(EncodeSlot& a, EncodeSlot& b, SimilarityKind kind,
                         double upstream) {
  if (kind == SimilarityKind::dot) {
    a.grad += upstream * b.embedding;
    b.grad += upstream * a.embedding;
    return;
  }
  const double na = a.embedding.norm();
  const double nb = b.embedding.norm();
  if (na == 0.0 || nb == 0.0) {
    throw_invalid("loss: cosine gradient undefined for a zero embedding");
  }
  const double s = a.embedding.dot(b.embedding) / (na * nb);
  const Eigen::VectorXd da =
      b.embedding / (na * nb) - s * a.embedding / (na * na);
  const Eigen::VectorXd db =
      a.embedding / (na * nb) - s * b.embedding / (nb * nb);
  a.grad += upstream * da;
  b.grad += upstream * db;
}

void finalize_slot(const EncodeSlot& slot, const ToyEncoderParams& params,
                   ParamGrads& grads) {
  grads.projection += slot.pooled * slot.grad.transpose();
  const Eigen::VectorXd pooled_grad = params.projection * slot.grad;
  const double inv = 1.0 / static_cast<double>(slot.tokens->size());
  for (int t : *slot.tokens) {
    grads.embedding_table.row(t) += inv * pooled_grad.transpose();
  }
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    sum += std::exp(v[i] - m);
  }
  return m + std::log(sum);
}

void check_tau(double tau) {
  if (!(tau > 0.0) || tau > 1.0) {
    throw_invalid("loss: tau must lie in (0, 1]");
  }
}

// -sum_i sum_c q[i][c] * log softmax(sim(x_i, prompts))[c], targets constant.
LossReport targeted_cross_entropy(const std::vector<TargetedInstance>& instances,
                                  const ToyEncoderParams& params,
                                  const Tokenizer& tokenizer,
                                  const LabelSchema& schema,
                                  SimilarityKind kind, double tau,
                                  const std::string& component) {
  check_tau(tau);
  const auto label_count = static_cast<Eigen::Index>(schema.count());

  std::vector<std::vector<int>> prompt_tokens;
  prompt_tokens.reserve(schema.count());
  for (const auto& prompt : schema.prompts) {
    prompt_tokens.push_back(tokenizer.tokenize(prompt));
  }
  std::vector<EncodeSlot> prompts;
  prompts.reserve(schema.count());
  for (const auto& tokens : prompt_tokens) {
    prompts.push_back(make_slot(params, tokens));
  }

  LossReport report;
  report.grads = ParamGrads::zeros_like(params);

  std::vector<EncodeSlot> texts;
  texts.reserve(instances.size());
  for (const auto& instance : instances) {
    if (instance.target.weights.size() != label_count) {
      throw_invalid("loss: target distribution length does not match schema");
    }
    if (std::abs(instance.target.tau - tau) > 1e-12) {
      throw_invalid("loss: target built with a different tau");
    }
    EncodeSlot slot = make_slot(params, instance.tokens);

    Eigen::VectorXd row(label_count);
    for (Eigen::Index c = 0; c < label_count; ++c) {
      row[c] = similarity(slot.embedding, prompts[c].embedding, kind);
    }
    const double lse = log_sum_exp(row);
    for (Eigen::Index c = 0; c < label_count; ++c) {
      const double q = instance.target.weights[c];
      report.value += q * (lse - row[c]);
      const double p = std::exp(row[c] - lse);
      backprop_similarity(slot, prompts[c], kind, p - q);
    }
    texts.push_back(std::move(slot));
  }

  for (const auto& slot : texts) {
    finalize_slot(slot, params, report.grads);
  }
  for (const auto& slot : prompts) {
    finalize_slot(slot, params, report.grads);
  }
  report.components[component] = report.value;
  return report;
}

}  // namespace

LossReport loss_t2l(const std::vector<TargetedInstance>& instances,
                    const ToyEncoderParams& params, const Tokenizer& tokenizer,
                    const LabelSchema& schema, SimilarityKind kind,
                    double tau) {
  return targeted_cross_entropy(instances, params, tokenizer, schema, kind, tau,
                                "t2l");
}

LossReport loss_g2l(const BatchSpec& batch, const ToyEncoderParams& params,
                    const Tokenizer& tokenizer, const LabelSchema& schema,
                    SimilarityKind kind) {
  std::vector<TargetedInstance> instances;
  for (const auto& item : batch.items) {
    if (item.conditionals.empty()) {
      throw_invalid("loss_g2l: document '" + item.doc_id +
                    "' has no conditional augmentation");
    }
    for (const auto& cond : item.conditionals) {
      instances.push_back({cond.tokens, cond.target});
    }
  }
  return targeted_cross_entropy(instances, params, tokenizer, schema, kind,
                                batch.tau, "g2l");
}

LossReport loss_t2g(const std::vector<std::vector<int>>& originals,
                    const std::vector<std::vector<std::vector<int>>>& groups,
                    const ToyEncoderParams& params, SimilarityKind kind) {
  if (originals.empty()) {
    throw_invalid("loss_t2g: empty batch");
  }
  if (groups.size() != originals.size()) {
    throw_invalid("loss_t2g: one augmentation group required per batch member");
  }
  const auto n = originals.size();

  std::vector<EncodeSlot> texts;
  texts.reserve(n);
  for (const auto& tokens : originals) {
    texts.push_back(make_slot(params, tokens));
  }
  std::vector<std::vector<EncodeSlot>> augs(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (groups[i].empty()) {
      throw_invalid("loss_t2g: empty augmentation group for batch member " +
                    std::to_string(i));
    }
    augs[i].reserve(groups[i].size());
    for (const auto& tokens : groups[i]) {
      augs[i].push_back(make_slot(params, tokens));
    }
  }

  LossReport report;
  report.grads = ParamGrads::zeros_like(params);

  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd batch_sims(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
      batch_sims[static_cast<Eigen::Index>(j)] =
          similarity(texts[i].embedding, texts[j].embedding, kind);
    }
    const double lse = log_sum_exp(batch_sims);

    const double inv = 1.0 / static_cast<double>(augs[i].size());
    for (auto& aug : augs[i]) {
      const double s = similarity(texts[i].embedding, aug.embedding, kind);
      report.value += inv * (lse - s);
      backprop_similarity(texts[i], aug, kind, -inv);
    }
    // The normalizer appears once per group member; the inv factors sum to 1.
    for (std::size_t j = 0; j < n; ++j) {
      const double softmax_j =
          std::exp(batch_sims[static_cast<Eigen::Index>(j)] - lse);
      backprop_similarity(texts[i], texts[j], kind, softmax_j);
    }
  }

  for (const auto& slot : texts) {
    finalize_slot(slot, params, report.grads);
  }
  for (const auto& group : augs) {
    for (const auto& slot : group) {
      finalize_slot(slot, params, report.grads);
    }
  }
  report.components["t2g"] = report.value;
  return report;
}

std::vector<std::vector<std::vector<int>>> t2g_groups(const BatchSpec& batch) {
  std::vector<std::vector<std::vector<int>>> groups(batch.items.size());
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    for (const auto& other : batch.items) {
      if (other.pseudo_label != batch.items[i].pseudo_label) {
        continue;
      }
      for (const auto& tokens : other.augmented) {
        groups[i].push_back(tokens);
      }
    }
  }
  return groups;
}

LossReport loss_t2g(const BatchSpec& batch, const ToyEncoderParams& params,
                    SimilarityKind kind) {
  std::vector<std::vector<int>> originals;
  originals.reserve(batch.items.size());
  for (const auto& item : batch.items) {
    originals.push_back(item.tokens);
  }
  return loss_t2g(originals, t2g_groups(batch), params, kind);
}

LossReport composite_loss(const BatchSpec& batch,
                          const ToyEncoderParams& params,
                          const Tokenizer& tokenizer, const LabelSchema& schema,
                          SimilarityKind kind) {
  LossReport g2l = loss_g2l(batch, params, tokenizer, schema, kind);
  LossReport t2g = loss_t2g(batch, params, kind);

  LossReport total;
  total.value = g2l.value + t2g.value;
  total.grads = std::move(g2l.grads);
  total.grads += t2g.grads;
  total.components["g2l"] = g2l.value;
  total.components["t2g"] = t2g.value;
  return total;
}

BatchSpec assemble_batch(const std::vector<PseudoLabelOutcome>& members,
                         const std::vector<Document>& corpus,
                         const InputAugMap& input_augs,
                         const ConditionalAugMap& conditional_augs,
                         const ToyEncoderParams& params,
                         const Tokenizer& tokenizer, const LabelSchema& schema,
                         SimilarityKind kind, double tau) {
  check_tau(tau);
  const auto prompts = encode_label_prompts(params, tokenizer, schema);

  BatchSpec batch;
  batch.tau = tau;
  batch.items.reserve(members.size());
  for (const auto& member : members) {
    if (member.pair.doc_index >= corpus.size()) {
      throw_invalid("assemble_batch: document index out of range");
    }
    const Document& doc = corpus[member.pair.doc_index];

    BatchItem item;
    item.doc_index = member.pair.doc_index;
    item.doc_id = doc.id;
    item.pseudo_label = member.pair.pseudo_label;
    item.tokens = doc.tokens.empty() ? tokenizer.tokenize(doc.text) : doc.tokens;
    item.target = member.target;

    auto aug_it = input_augs.find(doc.id);
    if (aug_it == input_augs.end()) {
      throw_invalid("assemble_batch: no input augmentations for document '" +
                    doc.id + "'");
    }
    for (const auto& text : aug_it->second.texts) {
      item.augmented.push_back(
          tokenizer.tokenize(concat_text(doc.text, text)));
    }

    auto cond_it =
        conditional_augs.find({doc.id, member.pair.pseudo_label});
    if (cond_it == conditional_augs.end() || cond_it->second.texts.empty()) {
      throw_invalid(
          "assemble_batch: missing conditional augmentation for document '" +
          doc.id + "'");
    }
    for (const auto& text : cond_it->second.texts) {
      ConditionalInstance cond;
      cond.tokens = tokenizer.tokenize(concat_text(doc.text, text));
      const SimilarityRow row =
          score(encode(params, cond.tokens), prompts, kind);
      cond.target = soft_target(row, tau);
      item.conditionals.push_back(std::move(cond));
    }
    batch.items.push_back(std::move(item));
  }
  return batch;
}

}  // namespace gcst
