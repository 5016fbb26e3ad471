#include "gcst/io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gcst/rng.hpp"

namespace gcst {

namespace {

using nlohmann::json;

std::string similarity_name(SimilarityKind kind) {
  return kind == SimilarityKind::dot ? "dot" : "cosine";
}

SimilarityKind similarity_from(const std::string& name) {
  if (name == "dot") {
    return SimilarityKind::dot;
  }
  if (name == "cosine") {
    return SimilarityKind::cosine;
  }
  throw Error(ErrorCode::parse_error, "unknown similarity kind '" + name + "'");
}

std::string schedule_name(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::automatic:
      return "auto";
    case ScheduleKind::constant:
      return "constant";
    case ScheduleKind::ramp:
      return "ramp";
  }
  return "auto";
}

ScheduleKind schedule_from(const std::string& name) {
  if (name == "auto") {
    return ScheduleKind::automatic;
  }
  if (name == "constant") {
    return ScheduleKind::constant;
  }
  if (name == "ramp") {
    return ScheduleKind::ramp;
  }
  throw Error(ErrorCode::parse_error, "unknown schedule kind '" + name + "'");
}

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "iterations",      "schedule",
      "samples_per_class", "ramp_increment",
      "tau",             "lr",
      "per_class_per_batch", "k",
      "m",               "epochs_per_iteration",
      "sim",             "seed",
      "input_augmentation", "inference_augmentation",
      "merge_includes_original", "hidden_dim",
      "embed_dim",       "init_scale",
      "init_projection_noise", "max_length",
      "generation",      "backend",
      "remote",          "corpus",
      "schema",          "cache",
      "checkpoint_dir",  "report_dir"};
  return keys;
}

}  // namespace

std::string config_hash(const RunConfig& config) {
  // Paths are excluded: two runs over the same data with the same semantics
  // must hash identically regardless of where files live.
  std::ostringstream canon;
  const TrainConfig& t = config.train;
  canon << "iterations=" << t.iterations << ";schedule=" << schedule_name(t.schedule)
        << ";samples_per_class=" << t.samples_per_class
        << ";ramp_increment=" << t.ramp_increment << ";tau=" << t.tau
        << ";lr=" << t.lr << ";per_class_per_batch=" << t.per_class_per_batch
        << ";k=" << t.k_input_augs << ";m=" << t.m_conditional_augs
        << ";epochs=" << t.epochs_per_iteration
        << ";sim=" << similarity_name(t.similarity) << ";seed=" << t.seed
        << ";input_aug=" << t.input_augmentation
        << ";inf_aug=" << t.inference_augmentation
        << ";merge_orig=" << t.merge_includes_original
        << ";hidden=" << t.hidden_dim << ";embed=" << t.embed_dim
        << ";init_scale=" << t.init_scale
        << ";init_projection_noise=" << t.init_projection_noise
        << ";max_length=" << t.max_length
        << ";gen_temperature=" << t.generation.temperature
        << ";gen_top_p=" << t.generation.top_p
        << ";gen_min_length=" << t.generation.min_length
        << ";gen_max_length=" << t.generation.max_length
        << ";backend=" << config.backend
        << ";endpoint=" << config.remote.endpoint;
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canon.str())));
  return std::string(out);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::io_error, "config: cannot open " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error,
                "config: " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) {
    throw Error(ErrorCode::parse_error,
                "config: " + path.string() + ": expected a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    if (!known_config_keys().count(key)) {
      throw Error(ErrorCode::parse_error,
                  "config: unknown key '" + key + "' in " + path.string());
    }
  }

  RunConfig config;
  TrainConfig& t = config.train;
  try {
    if (j.contains("iterations")) t.iterations = j["iterations"].get<std::size_t>();
    if (j.contains("schedule")) t.schedule = schedule_from(j["schedule"].get<std::string>());
    if (j.contains("samples_per_class")) t.samples_per_class = j["samples_per_class"].get<std::size_t>();
    if (j.contains("ramp_increment")) t.ramp_increment = j["ramp_increment"].get<std::size_t>();
    if (j.contains("tau")) t.tau = j["tau"].get<double>();
    if (j.contains("lr")) t.lr = j["lr"].get<double>();
    if (j.contains("per_class_per_batch")) t.per_class_per_batch = j["per_class_per_batch"].get<std::size_t>();
    if (j.contains("k")) t.k_input_augs = j["k"].get<std::size_t>();
    if (j.contains("m")) t.m_conditional_augs = j["m"].get<std::size_t>();
    if (j.contains("epochs_per_iteration")) t.epochs_per_iteration = j["epochs_per_iteration"].get<std::size_t>();
    if (j.contains("sim")) t.similarity = similarity_from(j["sim"].get<std::string>());
    if (j.contains("seed")) t.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("input_augmentation")) t.input_augmentation = j["input_augmentation"].get<bool>();
    if (j.contains("inference_augmentation")) t.inference_augmentation = j["inference_augmentation"].get<bool>();
    if (j.contains("merge_includes_original")) t.merge_includes_original = j["merge_includes_original"].get<bool>();
    if (j.contains("hidden_dim")) t.hidden_dim = j["hidden_dim"].get<std::size_t>();
    if (j.contains("embed_dim")) t.embed_dim = j["embed_dim"].get<std::size_t>();
    if (j.contains("init_scale")) t.init_scale = j["init_scale"].get<double>();
    if (j.contains("init_projection_noise")) t.init_projection_noise = j["init_projection_noise"].get<double>();
    if (j.contains("max_length")) t.max_length = j["max_length"].get<std::size_t>();
    if (j.contains("generation")) {
      const auto& g = j["generation"];
      if (g.contains("temperature")) t.generation.temperature = g["temperature"].get<double>();
      if (g.contains("top_p")) t.generation.top_p = g["top_p"].get<double>();
      if (g.contains("min_length")) t.generation.min_length = g["min_length"].get<std::size_t>();
      if (g.contains("max_length")) t.generation.max_length = g["max_length"].get<std::size_t>();
    }
    if (j.contains("backend")) config.backend = j["backend"].get<std::string>();
    if (j.contains("remote")) {
      const auto& r = j["remote"];
      if (r.contains("endpoint")) config.remote.endpoint = r["endpoint"].get<std::string>();
      if (r.contains("token_env")) config.remote.token_env = r["token_env"].get<std::string>();
      if (r.contains("timeout_seconds")) config.remote.timeout_seconds = r["timeout_seconds"].get<int>();
      if (r.contains("max_attempts")) config.remote.max_attempts = r["max_attempts"].get<int>();
      if (r.contains("initial_backoff_ms")) config.remote.initial_backoff_ms = r["initial_backoff_ms"].get<int>();
    }
    if (j.contains("corpus")) config.corpus_path = j["corpus"].get<std::string>();
    if (j.contains("schema")) config.schema_path = j["schema"].get<std::string>();
    if (j.contains("cache")) config.cache_path = j["cache"].get<std::string>();
    if (j.contains("checkpoint_dir")) config.checkpoint_dir = j["checkpoint_dir"].get<std::string>();
    if (j.contains("report_dir")) config.report_dir = j["report_dir"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error,
                "config: " + path.string() + ": " + e.what());
  }
  if (config.backend != "mock" && config.backend != "remote") {
    throw Error(ErrorCode::parse_error,
                "config: backend must be 'mock' or 'remote'");
  }
  return config;
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
  const TrainConfig& t = config.train;
  json j{{"iterations", t.iterations},
         {"schedule", schedule_name(t.schedule)},
         {"samples_per_class", t.samples_per_class},
         {"ramp_increment", t.ramp_increment},
         {"tau", t.tau},
         {"lr", t.lr},
         {"per_class_per_batch", t.per_class_per_batch},
         {"k", t.k_input_augs},
         {"m", t.m_conditional_augs},
         {"epochs_per_iteration", t.epochs_per_iteration},
         {"sim", similarity_name(t.similarity)},
         {"seed", t.seed},
         {"input_augmentation", t.input_augmentation},
         {"inference_augmentation", t.inference_augmentation},
         {"merge_includes_original", t.merge_includes_original},
         {"hidden_dim", t.hidden_dim},
         {"embed_dim", t.embed_dim},
         {"init_scale", t.init_scale},
         {"init_projection_noise", t.init_projection_noise},
         {"max_length", t.max_length},
         {"generation",
          {{"temperature", t.generation.temperature},
           {"top_p", t.generation.top_p},
           {"min_length", t.generation.min_length},
           {"max_length", t.generation.max_length}}},
         {"backend", config.backend}};
  if (!config.remote.endpoint.empty()) {
    j["remote"] = {{"endpoint", config.remote.endpoint},
                   {"token_env", config.remote.token_env},
                   {"timeout_seconds", config.remote.timeout_seconds},
                   {"max_attempts", config.remote.max_attempts},
                   {"initial_backoff_ms", config.remote.initial_backoff_ms}};
  }
  if (!config.corpus_path.empty()) j["corpus"] = config.corpus_path.string();
  if (!config.schema_path.empty()) j["schema"] = config.schema_path.string();
  if (!config.cache_path.empty()) j["cache"] = config.cache_path.string();
  if (!config.checkpoint_dir.empty()) j["checkpoint_dir"] = config.checkpoint_dir.string();
  if (!config.report_dir.empty()) j["report_dir"] = config.report_dir.string();
  atomic_write(path, j.dump(2) + "\n");
}

IngestResult ingest(const std::filesystem::path& corpus_path,
                    const std::filesystem::path& schema_path,
                    std::size_t max_length) {
  // Schema first: gold labels are validated against it.
  std::ifstream schema_in(schema_path);
  if (!schema_in) {
    throw Error(ErrorCode::io_error,
                "ingest: cannot open schema " + schema_path.string());
  }
  json schema_json;
  try {
    schema_in >> schema_json;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error,
                "ingest: schema " + schema_path.string() + ": " + e.what());
  }

  IngestResult result;
  try {
    result.schema.descriptions =
        schema_json.at("labels").get<std::vector<std::string>>();
    if (schema_json.contains("prompts")) {
      result.schema.prompts =
          schema_json["prompts"].get<std::vector<std::string>>();
    } else {
      std::string tpl = schema_json.value("prompt_template", "about");
      PromptTemplate prompt_template;
      if (tpl == "about") {
        prompt_template = PromptTemplate::about;
      } else if (tpl == "category") {
        prompt_template = PromptTemplate::category;
      } else {
        throw Error(ErrorCode::parse_error,
                    "ingest: unknown prompt_template '" + tpl + "'");
      }
      for (const auto& label : result.schema.descriptions) {
        result.schema.prompts.push_back(
            render_label_prompt(label, prompt_template));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error,
                "ingest: schema " + schema_path.string() + ": " + e.what());
  }
  validate_schema(result.schema);

  std::ifstream corpus_in(corpus_path);
  if (!corpus_in) {
    throw Error(ErrorCode::io_error,
                "ingest: cannot open corpus " + corpus_path.string());
  }
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_number = 0;
  std::vector<std::string> texts;
  while (std::getline(corpus_in, line)) {
    ++line_number;
    if (line.empty()) {
      continue;
    }
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse_error,
                  "ingest: " + corpus_path.string() + ":" +
                      std::to_string(line_number) + ": " + e.what());
    }
    Document doc;
    std::optional<int> gold;
    try {
      doc.id = record.at("id").get<std::string>();
      doc.text = record.at("text").get<std::string>();
      if (record.contains("gold_label")) {
        const std::string label = record["gold_label"].get<std::string>();
        const auto it = std::find(result.schema.descriptions.begin(),
                                  result.schema.descriptions.end(), label);
        if (it == result.schema.descriptions.end()) {
          throw Error(ErrorCode::parse_error,
                      "ingest: " + corpus_path.string() + ":" +
                          std::to_string(line_number) + ": gold label '" +
                          label + "' is not in the schema");
        }
        gold = static_cast<int>(it - result.schema.descriptions.begin());
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse_error,
                  "ingest: " + corpus_path.string() + ":" +
                      std::to_string(line_number) + ": " + e.what());
    }
    if (!seen_ids.insert(doc.id).second) {
      throw Error(ErrorCode::parse_error,
                  "ingest: " + corpus_path.string() + ":" +
                      std::to_string(line_number) + ": duplicate id '" +
                      doc.id + "'");
    }
    if (Tokenizer::split_lower(doc.text).empty()) {
      throw Error(ErrorCode::parse_error,
                  "ingest: " + corpus_path.string() + ":" +
                      std::to_string(line_number) + ": document '" + doc.id +
                      "' has no tokens");
    }
    texts.push_back(doc.text);
    result.corpus.docs.push_back(std::move(doc));
    result.corpus.gold.push_back(gold);
  }
  if (result.corpus.docs.empty()) {
    throw Error(ErrorCode::parse_error,
                "ingest: corpus " + corpus_path.string() + " is empty");
  }

  for (const auto& prompt : result.schema.prompts) {
    texts.push_back(prompt);
  }
  result.tokenizer = Tokenizer(texts, max_length);
  for (auto& doc : result.corpus.docs) {
    doc.tokens = result.tokenizer.tokenize(doc.text);
  }
  return result;
}

void emit_corpus(const Corpus& corpus, const LabelSchema& schema,
                 const std::filesystem::path& path) {
  std::string body;
  for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
    json record{{"id", corpus.docs[i].id}, {"text", corpus.docs[i].text}};
    if (i < corpus.gold.size() && corpus.gold[i]) {
      record["gold_label"] =
          schema.descriptions[static_cast<std::size_t>(*corpus.gold[i])];
    }
    body += record.dump() + "\n";
  }
  atomic_write(path, body);
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) {
      throw Error(ErrorCode::io_error, "atomic_write: cannot open " + tmp);
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      throw Error(ErrorCode::io_error, "atomic_write: write failed on " + tmp);
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string iteration_report_line(const IterationReport& report) {
  json j{{"iteration", report.iteration},
         {"s_t", report.s_t},
         {"pseudo_label_agreement", report.pseudo_label_agreement},
         {"mean_confidence", report.mean_confidence},
         {"sampled_per_class", report.sampled_per_class},
         {"loss_components", report.loss_components},
         {"first_step_loss", report.first_step_loss},
         {"last_step_loss", report.last_step_loss},
         {"update_steps", report.update_steps}};
  if (report.gold_accuracy) {
    j["gold_accuracy"] = *report.gold_accuracy;
  }
  return j.dump();
}

IterationReport parse_iteration_report(const std::string& line) {
  IterationReport report;
  try {
    json j = json::parse(line);
    report.iteration = j.at("iteration").get<std::size_t>();
    report.s_t = j.at("s_t").get<std::size_t>();
    report.pseudo_label_agreement = j.at("pseudo_label_agreement").get<double>();
    report.mean_confidence = j.at("mean_confidence").get<double>();
    report.sampled_per_class =
        j.at("sampled_per_class").get<std::vector<std::size_t>>();
    report.loss_components =
        j.at("loss_components").get<std::map<std::string, double>>();
    report.first_step_loss = j.at("first_step_loss").get<double>();
    report.last_step_loss = j.at("last_step_loss").get<double>();
    report.update_steps = j.at("update_steps").get<std::size_t>();
    if (j.contains("gold_accuracy")) {
      report.gold_accuracy = j["gold_accuracy"].get<double>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error,
                std::string("iteration report: ") + e.what());
  }
  return report;
}

std::string metrics_record(const EvalMetrics& metrics) {
  json precision = json::array();
  for (const auto& p : metrics.precision_at) {
    precision.push_back({{"k", p.requested_k},
                         {"effective_k", p.effective_k},
                         {"clamped", p.clamped},
                         {"precision", p.value}});
  }
  json j{{"accuracy", metrics.accuracy},
         {"per_class_f1", metrics.per_class_f1},
         {"precision_at", precision}};
  return j.dump();
}

std::string pseudo_label_line(const PseudoLabelOutcome& outcome,
                              const LabelSchema& schema) {
  json j{{"id", outcome.pair.doc_id},
         {"pseudo_label",
          schema.descriptions[static_cast<std::size_t>(
              outcome.pair.pseudo_label)]},
         {"label_index", outcome.pair.pseudo_label},
         {"confidence", outcome.pair.confidence}};
  return j.dump();
}

std::string error_record(const std::string& kind, const std::string& detail) {
  json j{{"error", kind}, {"detail", detail}};
  return j.dump();
}

}  // namespace gcst
