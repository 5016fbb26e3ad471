#include "gcst/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gcst/io.hpp"
#include "gcst/rng.hpp"

namespace gcst {

std::vector<PseudoLabelOutcome> balanced_sample(
    const std::vector<PseudoLabelOutcome>& candidates, std::size_t s_t,
    std::size_t label_count) {
  if (s_t == 0) {
    throw_invalid("balanced_sample: S_t must be positive");
  }
  if (label_count < 2) {
    throw_invalid("balanced_sample: at least two classes required");
  }
  std::vector<std::vector<const PseudoLabelOutcome*>> buckets(label_count);
  for (const auto& candidate : candidates) {
    const int label = candidate.pair.pseudo_label;
    if (label < 0 || static_cast<std::size_t>(label) >= label_count) {
      throw_invalid("balanced_sample: pseudo-label out of range");
    }
    buckets[static_cast<std::size_t>(label)].push_back(&candidate);
  }
  for (std::size_t c = 0; c < label_count; ++c) {
    if (buckets[c].size() < s_t) {
      throw Error(ErrorCode::insufficient_class_support,
                  "balanced_sample: class " + std::to_string(c) + " has " +
                      std::to_string(buckets[c].size()) + " candidates, needs " +
                      std::to_string(s_t));
    }
    std::sort(buckets[c].begin(), buckets[c].end(),
              [](const PseudoLabelOutcome* a, const PseudoLabelOutcome* b) {
                if (a->pair.confidence != b->pair.confidence) {
                  return a->pair.confidence > b->pair.confidence;
                }
                return a->pair.doc_id < b->pair.doc_id;
              });
  }
  std::vector<PseudoLabelOutcome> selected;
  selected.reserve(s_t * label_count);
  for (std::size_t c = 0; c < label_count; ++c) {
    for (std::size_t r = 0; r < s_t; ++r) {
      selected.push_back(*buckets[c][r]);
    }
  }
  return selected;
}

std::vector<std::vector<PseudoLabelOutcome>> stratified_batches(
    const std::vector<PseudoLabelOutcome>& sampled, std::size_t s_t,
    std::size_t label_count, std::size_t per_class) {
  if (per_class == 0 || label_count == 0 || s_t == 0) {
    throw_invalid("stratified_batches: counts must be positive");
  }
  if (sampled.size() != s_t * label_count) {
    throw_invalid("stratified_batches: expected a balanced sample of size "
                  "S_t * label_count");
  }
  const std::size_t batches = s_t / per_class;
  std::vector<std::vector<PseudoLabelOutcome>> out;
  out.reserve(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    std::vector<PseudoLabelOutcome> members;
    members.reserve(label_count * per_class);
    for (std::size_t c = 0; c < label_count; ++c) {
      for (std::size_t r = 0; r < per_class; ++r) {
        members.push_back(sampled[c * s_t + b * per_class + r]);
      }
    }
    out.push_back(std::move(members));
  }
  return out;
}

namespace {

void validate_train_config(const TrainConfig& config) {
  if (!(config.tau > 0.0) || config.tau > 1.0) {
    throw_invalid("train config: tau must lie in (0, 1]");
  }
  if (!(config.lr > 0.0)) {
    throw_invalid("train config: lr must be positive");
  }
  if (config.per_class_per_batch == 0 || config.samples_per_class == 0 ||
      config.k_input_augs == 0 || config.m_conditional_augs == 0 ||
      config.epochs_per_iteration == 0 || config.hidden_dim == 0 ||
      config.embed_dim == 0 || config.max_length == 0) {
    throw_invalid("train config: counts and dimensions must be positive");
  }
  if (config.samples_per_class < config.per_class_per_batch) {
    throw_invalid(
        "train config: samples_per_class must cover at least one batch "
        "(per_class_per_batch)");
  }
}

std::size_t schedule_s_t(const TrainConfig& config, std::size_t iteration,
                         const std::vector<PseudoLabelOutcome>& outcomes,
                         std::size_t label_count) {
  switch (config.schedule) {
    case ScheduleKind::constant:
      return config.samples_per_class;
    case ScheduleKind::ramp:
      return config.samples_per_class + (iteration - 1) * config.ramp_increment;
    case ScheduleKind::automatic: {
      std::vector<std::size_t> support(label_count, 0);
      for (const auto& outcome : outcomes) {
        ++support[static_cast<std::size_t>(outcome.pair.pseudo_label)];
      }
      std::size_t smallest = std::numeric_limits<std::size_t>::max();
      std::size_t smallest_class = 0;
      for (std::size_t c = 0; c < label_count; ++c) {
        if (support[c] < smallest) {
          smallest = support[c];
          smallest_class = c;
        }
      }
      if (smallest == 0) {
        throw Error(ErrorCode::insufficient_class_support,
                    "self_train: class " + std::to_string(smallest_class) +
                        " received no pseudo-labels");
      }
      return std::min(smallest, config.samples_per_class);
    }
  }
  throw_invalid("train config: unknown schedule");
}

double labeling_agreement(const std::vector<PseudoLabelOutcome>& current,
                          const std::vector<PseudoLabelOutcome>& previous) {
  std::size_t same = 0;
  for (std::size_t i = 0; i < current.size(); ++i) {
    if (current[i].pair.pseudo_label == previous[i].pair.pseudo_label) {
      ++same;
    }
  }
  return current.empty()
             ? 1.0
             : static_cast<double>(same) / static_cast<double>(current.size());
}

std::filesystem::path params_path(const std::filesystem::path& dir,
                                  std::size_t iteration) {
  char name[32];
  std::snprintf(name, sizeof(name), "iter_%04zu.params", iteration);
  return dir / name;
}

std::filesystem::path meta_path(const std::filesystem::path& dir,
                                std::size_t iteration) {
  char name[32];
  std::snprintf(name, sizeof(name), "iter_%04zu.meta.json", iteration);
  return dir / name;
}

void write_checkpoint(const CheckpointOptions& opts, std::size_t iteration,
                      const ToyEncoderParams& params,
                      const std::vector<IterationReport>& reports,
                      const std::optional<double>& zero_shot) {
  std::filesystem::create_directories(opts.directory);
  save_params(params, params_path(opts.directory, iteration));

  nlohmann::json meta{{"iteration", iteration},
                      {"config_hash", opts.config_hash},
                      {"theta_version", params.theta_version}};
  if (!opts.cache_path.empty()) {
    meta["gendict"] = opts.cache_path.string();
  }
  if (zero_shot) {
    meta["zero_shot_accuracy"] = *zero_shot;
  }
  atomic_write(meta_path(opts.directory, iteration), meta.dump() + "\n");

  std::string lines;
  for (const auto& report : reports) {
    lines += iteration_report_line(report) + "\n";
  }
  atomic_write(opts.directory / "reports.jsonl", lines);
}

struct ResumeState {
  std::size_t completed = 0;
  ToyEncoderParams params;
  std::vector<IterationReport> reports;
  std::optional<double> zero_shot;
};

std::optional<ResumeState> try_resume(const CheckpointOptions& opts,
                                      std::size_t max_iterations) {
  for (std::size_t n = max_iterations; n >= 1; --n) {
    const auto pp = params_path(opts.directory, n);
    const auto mp = meta_path(opts.directory, n);
    if (!std::filesystem::exists(pp) || !std::filesystem::exists(mp)) {
      continue;
    }
    std::ifstream meta_in(mp);
    nlohmann::json meta = nlohmann::json::parse(meta_in, nullptr, true);
    const std::string hash = meta.at("config_hash").get<std::string>();
    if (hash != opts.config_hash) {
      throw Error(ErrorCode::config_mismatch,
                  "checkpoint at " + pp.string() +
                      " was produced by a different configuration");
    }
    ResumeState state;
    state.completed = n;
    state.params = load_params(pp);
    if (meta.contains("zero_shot_accuracy")) {
      state.zero_shot = meta["zero_shot_accuracy"].get<double>();
    }
    std::ifstream reports_in(opts.directory / "reports.jsonl");
    std::string line;
    while (state.reports.size() < n && std::getline(reports_in, line)) {
      if (!line.empty()) {
        state.reports.push_back(parse_iteration_report(line));
      }
    }
    return state;
  }
  return std::nullopt;
}

}  // namespace

std::optional<double> accuracy_against_gold(
    const std::vector<PseudoLabelOutcome>& labeling,
    const std::vector<std::optional<int>>& gold) {
  std::size_t labeled = 0;
  std::size_t correct = 0;
  for (const auto& outcome : labeling) {
    const std::size_t i = outcome.pair.doc_index;
    if (i < gold.size() && gold[i]) {
      ++labeled;
      if (*gold[i] == outcome.pair.pseudo_label) {
        ++correct;
      }
    }
  }
  if (labeled == 0) {
    return std::nullopt;
  }
  return static_cast<double>(correct) / static_cast<double>(labeled);
}

SelfTrainResult self_train(const Corpus& corpus, const LabelSchema& schema,
                           const Tokenizer& tokenizer,
                           const TrainConfig& config,
                           GenerationBackend& backend, GenDict& cache,
                           const std::optional<CheckpointOptions>& checkpoint) {
  validate_train_config(config);
  validate_schema(schema);
  if (corpus.docs.empty()) {
    throw_invalid("self_train: empty corpus");
  }
  const std::size_t label_count = schema.count();

  SelfTrainResult result;
  result.params = init_encoder_params(
      tokenizer.vocab_size(), config.hidden_dim, config.embed_dim,
      derive_seed(config.seed, "encoder-init"), config.init_scale,
      config.init_projection_noise);

  std::size_t start_iteration = 1;
  if (checkpoint) {
    if (auto resumed = try_resume(*checkpoint, config.iterations)) {
      start_iteration = resumed->completed + 1;
      result.params = std::move(resumed->params);
      result.reports = std::move(resumed->reports);
      result.zero_shot_accuracy = resumed->zero_shot;
    }
  }

  // Input augmentations are generated once up front and reused by every
  // iteration through the cache.
  InputAugMap input_augs;
  if (config.input_augmentation) {
    for (const auto& doc : corpus.docs) {
      input_augs.emplace(doc.id,
                         generate_input_augs(doc, config.k_input_augs, backend,
                                             cache, config.generation));
    }
  } else {
    input_augs = disabled_augmentations(corpus.docs);
  }

  const MergeOptions merge_opts{config.merge_includes_original};
  std::vector<PseudoLabelOutcome> previous_labeling;
  if (start_iteration > 1) {
    // Rebuild the reference labeling at the restored parameters so agreement
    // is consistent across a resume.
    previous_labeling =
        pseudo_label_corpus(corpus.docs, schema, result.params, tokenizer,
                            input_augs, config.similarity, config.tau,
                            merge_opts);
  }

  for (std::size_t iteration = start_iteration; iteration <= config.iterations;
       ++iteration) {
    auto outcomes =
        pseudo_label_corpus(corpus.docs, schema, result.params, tokenizer,
                            input_augs, config.similarity, config.tau,
                            merge_opts);
    if (iteration == 1) {
      result.zero_shot_accuracy = accuracy_against_gold(outcomes, corpus.gold);
    }

    IterationReport report;
    report.iteration = iteration;
    report.pseudo_label_agreement =
        previous_labeling.empty() ? 1.0
                                  : labeling_agreement(outcomes, previous_labeling);
    double confidence_sum = 0.0;
    for (const auto& outcome : outcomes) {
      confidence_sum += outcome.pair.confidence;
    }
    report.mean_confidence =
        confidence_sum / static_cast<double>(outcomes.size());
    report.gold_accuracy = accuracy_against_gold(outcomes, corpus.gold);

    const std::size_t s_t =
        schedule_s_t(config, iteration, outcomes, label_count);
    report.s_t = s_t;
    auto sampled = balanced_sample(outcomes, s_t, label_count);
    report.sampled_per_class.assign(label_count, s_t);

    ConditionalAugMap conditional_augs;
    for (const auto& member : sampled) {
      const Document& doc = corpus.docs[member.pair.doc_index];
      const int label = member.pair.pseudo_label;
      const ConditionalAugKey key{doc.id, label};
      if (!conditional_augs.count(key)) {
        conditional_augs.emplace(
            key, generate_conditional_augs(
                     doc, label,
                     schema.descriptions[static_cast<std::size_t>(label)],
                     config.m_conditional_augs, backend, cache,
                     config.generation));
      }
    }

    std::vector<BatchSpec> batch_specs;
    for (const auto& members : stratified_batches(
             sampled, s_t, label_count, config.per_class_per_batch)) {
      batch_specs.push_back(assemble_batch(
          members, corpus.docs, input_augs, conditional_augs, result.params,
          tokenizer, schema, config.similarity, config.tau));
    }

    bool first_step = true;
    for (std::size_t epoch = 0; epoch < config.epochs_per_iteration; ++epoch) {
      for (const auto& spec : batch_specs) {
        const LossReport loss =
            composite_loss(spec, result.params, tokenizer, schema,
                           config.similarity);
        apply_gradients(result.params, loss.grads, config.lr);
        for (const auto& [name, value] : loss.components) {
          report.loss_components[name] += value;
        }
        if (first_step) {
          report.first_step_loss = loss.value;
          first_step = false;
        }
        report.last_step_loss = loss.value;
        ++report.update_steps;
      }
    }

    result.reports.push_back(report);
    if (checkpoint) {
      write_checkpoint(*checkpoint, iteration, result.params, result.reports,
                       result.zero_shot_accuracy);
    }
    previous_labeling = std::move(outcomes);
  }

  result.final_labeling =
      pseudo_label_corpus(corpus.docs, schema, result.params, tokenizer,
                          input_augs, config.similarity, config.tau, merge_opts);
  result.final_accuracy = accuracy_against_gold(result.final_labeling, corpus.gold);
  return result;
}

EvalMetrics evaluate(const Corpus& corpus, const LabelSchema& schema,
                     const Tokenizer& tokenizer,
                     const ToyEncoderParams& params, const EvalOptions& options,
                     GenerationBackend* backend, GenDict* cache) {
  validate_schema(schema);
  if (corpus.docs.empty()) {
    throw_invalid("evaluate: empty corpus");
  }
  const std::size_t label_count = schema.count();
  for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
    if (i >= corpus.gold.size() || !corpus.gold[i]) {
      throw_invalid("evaluate: document '" + corpus.docs[i].id +
                    "' has no gold label");
    }
    if (*corpus.gold[i] < 0 ||
        static_cast<std::size_t>(*corpus.gold[i]) >= label_count) {
      throw_invalid("evaluate: gold label out of range for document '" +
                    corpus.docs[i].id + "'");
    }
  }

  InputAugMap augs;
  if (options.inference_augmentation) {
    if (backend == nullptr || cache == nullptr) {
      throw_invalid(
          "evaluate: inference-time augmentation needs a backend and a cache");
    }
    for (const auto& doc : corpus.docs) {
      augs.emplace(doc.id, generate_input_augs(doc, options.k_input_augs,
                                               *backend, *cache,
                                               options.generation));
    }
  } else {
    augs = disabled_augmentations(corpus.docs);
  }

  const auto labeling = pseudo_label_corpus(
      corpus.docs, schema, params, tokenizer, augs, options.similarity, 1.0,
      MergeOptions{options.merge_includes_original});

  EvalMetrics metrics;
  metrics.accuracy = *accuracy_against_gold(labeling, corpus.gold);

  std::vector<std::size_t> tp(label_count, 0), fp(label_count, 0),
      fn(label_count, 0);
  for (const auto& outcome : labeling) {
    const int gold = *corpus.gold[outcome.pair.doc_index];
    const int pred = outcome.pair.pseudo_label;
    if (pred == gold) {
      ++tp[static_cast<std::size_t>(pred)];
    } else {
      ++fp[static_cast<std::size_t>(pred)];
      ++fn[static_cast<std::size_t>(gold)];
    }
  }
  metrics.per_class_f1.resize(label_count, 0.0);
  for (std::size_t c = 0; c < label_count; ++c) {
    const double denom =
        static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    metrics.per_class_f1[c] =
        denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp[c]) / denom;
  }

  std::vector<const PseudoLabelOutcome*> ranked;
  ranked.reserve(labeling.size());
  for (const auto& outcome : labeling) {
    ranked.push_back(&outcome);
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const PseudoLabelOutcome* a, const PseudoLabelOutcome* b) {
              if (a->pair.confidence != b->pair.confidence) {
                return a->pair.confidence > b->pair.confidence;
              }
              return a->pair.doc_id < b->pair.doc_id;
            });
  for (std::size_t k : options.precision_ks) {
    PrecisionAtK entry;
    entry.requested_k = k;
    entry.effective_k = std::min(k, ranked.size());
    entry.clamped = entry.effective_k != k;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < entry.effective_k; ++i) {
      if (ranked[i]->pair.pseudo_label ==
          *corpus.gold[ranked[i]->pair.doc_index]) {
        ++correct;
      }
    }
    entry.value = entry.effective_k == 0
                      ? 0.0
                      : static_cast<double>(correct) /
                            static_cast<double>(entry.effective_k);
    metrics.precision_at.push_back(entry);
  }
  return metrics;
}

}  // namespace gcst
