#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gcst/generator.hpp"
#include "gcst/losses.hpp"
#include "gcst/scoring.hpp"

namespace gcst {

enum class ScheduleKind {
  automatic,  // S_t = min class support, capped at samples_per_class
  constant,   // S_t = samples_per_class; errors when a class cannot fill it
  ramp,       // S_t = samples_per_class + (t-1) * ramp_increment
};

struct TrainConfig {
  std::size_t iterations = 5;  // T
  ScheduleKind schedule = ScheduleKind::automatic;
  std::size_t samples_per_class = 6;  // S_t (cap in automatic mode)
  std::size_t ramp_increment = 0;
  double tau = 0.1;
  double lr = 1e-5;  // toy fixture profiles override this
  std::size_t per_class_per_batch = 3;  // batch size = 3 * |labels|
  std::size_t k_input_augs = 5;
  std::size_t m_conditional_augs = 5;
  std::size_t epochs_per_iteration = 1;
  SimilarityKind similarity = SimilarityKind::dot;
  std::uint64_t seed = 17;
  bool input_augmentation = true;
  bool inference_augmentation = false;
  bool merge_includes_original = false;
  std::size_t hidden_dim = 16;
  std::size_t embed_dim = 16;
  double init_scale = 0.2;
  double init_projection_noise = 0.01;
  std::size_t max_length = 128;
  GenerationParams generation;
};

struct IterationReport {
  std::size_t iteration = 0;  // 1-based
  std::size_t s_t = 0;
  // Fraction of documents whose pseudo-label matches the previous
  // iteration's labeling; 1.0 on the first iteration.
  double pseudo_label_agreement = 1.0;
  double mean_confidence = 0.0;
  std::vector<std::size_t> sampled_per_class;
  std::map<std::string, double> loss_components;  // summed over update steps
  double first_step_loss = 0.0;
  double last_step_loss = 0.0;
  std::size_t update_steps = 0;
  std::optional<double> gold_accuracy;
};

/// Top S_t candidates per class by confidence (ties broken by document id),
/// exactly S_t from each of the label_count classes, ordered class-major by
/// rank. Throws Error(insufficient_class_support) naming the first class
/// that cannot fill its quota.
std::vector<PseudoLabelOutcome> balanced_sample(
    const std::vector<PseudoLabelOutcome>& candidates, std::size_t s_t,
    std::size_t label_count);

/// Splits a balanced_sample result into update batches holding exactly
/// per_class members of every class, in confidence order; a remainder that
/// cannot fill a batch is dropped.
std::vector<std::vector<PseudoLabelOutcome>> stratified_batches(
    const std::vector<PseudoLabelOutcome>& sampled, std::size_t s_t,
    std::size_t label_count, std::size_t per_class);

struct Corpus {
  std::vector<Document> docs;
  std::vector<std::optional<int>> gold;  // parallel to docs; may be empty
};

struct CheckpointOptions {
  std::filesystem::path directory;
  std::string config_hash;
  std::filesystem::path cache_path;  // recorded in the iteration metadata
};

struct SelfTrainResult {
  ToyEncoderParams params;
  std::vector<IterationReport> reports;
  std::optional<double> zero_shot_accuracy;  // before any update
  std::optional<double> final_accuracy;      // re-labeled after training
  std::vector<PseudoLabelOutcome> final_labeling;
};

/// The self-training loop: label the corpus with merged augmented
/// embeddings, sample a balanced high-confidence subset, fetch or generate
/// conditional augmentations through the cache, then run stratified batches
/// (per_class_per_batch members of every class) of gradient updates on the
/// g2l + t2g objective. Deterministic for a fixed seed and a deterministic
/// backend. When checkpointing is configured, each completed iteration is
/// persisted and a re-run resumes after the last one.
SelfTrainResult self_train(const Corpus& corpus, const LabelSchema& schema,
                           const Tokenizer& tokenizer,
                           const TrainConfig& config,
                           GenerationBackend& backend, GenDict& cache,
                           const std::optional<CheckpointOptions>& checkpoint =
                               std::nullopt);

struct PrecisionAtK {
  std::size_t requested_k = 0;
  std::size_t effective_k = 0;  // clamped to the corpus size
  bool clamped = false;
  double value = 0.0;
};

struct EvalMetrics {
  double accuracy = 0.0;
  std::vector<double> per_class_f1;
  std::vector<PrecisionAtK> precision_at;
};

struct EvalOptions {
  SimilarityKind similarity = SimilarityKind::dot;
  bool inference_augmentation = false;
  std::size_t k_input_augs = 5;
  bool merge_includes_original = false;
  std::vector<std::size_t> precision_ks = {10, 30, 100};
  GenerationParams generation;
};

/// Accuracy, per-class F1 (0 by convention for a class never predicted or
/// absent) and precision among the k most confident predictions. Requires
/// gold labels for every document. backend/cache are only touched when
/// inference-time augmentation is enabled.
EvalMetrics evaluate(const Corpus& corpus, const LabelSchema& schema,
                     const Tokenizer& tokenizer,
                     const ToyEncoderParams& params, const EvalOptions& options,
                     GenerationBackend* backend = nullptr,
                     GenDict* cache = nullptr);

// Fraction correct over the documents that carry a gold label; empty when
// none do.
std::optional<double> accuracy_against_gold(
    const std::vector<PseudoLabelOutcome>& labeling,
    const std::vector<std::optional<int>>& gold);

}  // namespace gcst
