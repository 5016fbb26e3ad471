#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gcst/selftrain.hpp"
#include "gcst/types.hpp"

namespace gcst {

struct RunConfig {
  TrainConfig train;
  std::string backend = "mock";  // mock | remote
  RemoteOptions remote;
  std::filesystem::path corpus_path;
  std::filesystem::path schema_path;
  std::filesystem::path cache_path;
  std::filesystem::path checkpoint_dir;
  std::filesystem::path report_dir;
};

/// Hash over the semantically meaningful fields (paths excluded); keys
/// checkpoints so a resumed run must match the run that produced them.
std::string config_hash(const RunConfig& config);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

struct IngestResult {
  Corpus corpus;
  LabelSchema schema;
  Tokenizer tokenizer;  // vocabulary from corpus texts + label prompts
};

/// Corpus: one JSON object per line {"id", "text", optional "gold_label"}.
/// Schema: {"labels": [...]} plus either "prompt_template"
/// ("category" | "about") or explicit "prompts". Parse errors carry line
/// numbers; duplicate ids and unknown gold labels are rejected.
IngestResult ingest(const std::filesystem::path& corpus_path,
                    const std::filesystem::path& schema_path,
                    std::size_t max_length = 128);

void emit_corpus(const Corpus& corpus, const LabelSchema& schema,
                 const std::filesystem::path& path);

// write-temp-then-rename; partial files never become visible
void atomic_write(const std::filesystem::path& path, const std::string& content);

std::string iteration_report_line(const IterationReport& report);
IterationReport parse_iteration_report(const std::string& line);

std::string metrics_record(const EvalMetrics& metrics);
std::string pseudo_label_line(const PseudoLabelOutcome& outcome,
                              const LabelSchema& schema);
std::string error_record(const std::string& kind, const std::string& detail);

}  // namespace gcst
